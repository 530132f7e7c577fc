#pragma once

#include "vinesim/kinematics.hpp"
#include "vinesim/pneumatics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vinesim {

enum class Mode { grow, retract, hold };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

struct TipMountConfig {
    double eversion_speed = 0.010;       // m/s
    double magnet_window = 0.020;        // arc-length span centred on the tip
    double body_pressure = 3e3;          // informational only
    double retraction_risk_threshold = 5e3;

    static TipMountConfig for_geometry(const RobotGeometry& g)
    {
        TipMountConfig t;
        t.magnet_window = g.l_cpam / 2.0;
        return t;
    }
};

// Everything the engine needs besides the dynamic state.
struct VineConfig {
    RobotGeometry geometry;
    ValveParams valves;
    CalibrationCurve calibration;
    TipMountConfig tip;

    static VineConfig prototype();
    void validate() const;
};

// Valve groups are numbered from 0 internally; group g covers cells
// [g * cpams_per_valve, (g + 1) * cpams_per_valve) and its valve sits at the distal end
// of the last cell, so the group can only be pressurized once all its cells are everted.
struct VineState {
    double everted_length = 0.0;
    Mode mode = Mode::hold;
    double speed = 0.010;
    double supply_left = 0.0;
    double supply_right = 0.0;
    double time = 0.0;
    std::int64_t ticks = 0;
    std::vector<ValveState> left;
    std::vector<ValveState> right;

    static VineState initial(const VineConfig& config);

    const std::vector<ValveState>& valves(Side side) const { return side == Side::left ? left : right; }

    friend bool operator==(const VineState&, const VineState&) = default;
};

struct Command {
    std::optional<Mode> set_mode;
    std::optional<double> set_supply_left;
    std::optional<double> set_supply_right;
    std::optional<double> set_speed;

    bool empty() const { return !set_mode && !set_supply_left && !set_supply_right && !set_speed; }
    // Fields set in `later` override ours.
    Command merged(const Command& later) const;
};

// Throws CommandRejected with a range diagnostic.
void validate_command(const Command& cmd, const VineConfig& config);

struct StepResult {
    VineState state;
    std::vector<std::string> warnings;
};

double valve_position(int group, const RobotGeometry& geometry);
// Tip position after advancing `state` by `dt` under `mode` and `speed`.
double advance_tip(double everted, Mode mode, double speed, double dt, const RobotGeometry& geometry);

// One fixed step: apply the command, move the tip, open every valve inside the magnet
// window and close the rest. Deterministic. Throws CommandRejected and leaves the input
// untouched when the command is invalid.
StepResult step(const VineState& state, double dt, const Command& cmd, const VineConfig& config);

// The backbone implied by the current pouch pressures. Fully everted cells bend,
// a partially everted frontmost cell is straight.
Backbone shape(const VineState& state, const VineConfig& config);

// Segment list for per-cell pressures; shared with path prediction.
std::vector<Segment> cell_segments(std::span<const double> left_pressure, std::span<const double> right_pressure,
                                   double partial_length, const RobotGeometry& geometry,
                                   const CalibrationCurve& calibration);

struct RiskEntry {
    int cell = 0;
    Side side = Side::left;
    double pressure = 0.0;
};

// Pressurized pouches still behind the tip while retracting. Advisory only.
std::vector<RiskEntry> check_retraction_risk(const VineState& state, const VineConfig& config);

// One line of a command log, kept in the log's own units (s, kPa, mm/s) so a replayed log
// converts to exactly the same SI values as the live run did.
struct CommandRecord {
    double t_s = 0.0;
    std::optional<Mode> mode;
    std::optional<double> supply_left_kpa;
    std::optional<double> supply_right_kpa;
    std::optional<double> speed_mm_s;

    Command to_command() const;
};

// `t_s,mode,supply_left_kpa,supply_right_kpa,speed_mm_s`; an empty field leaves that
// setting unchanged.
std::vector<CommandRecord> parse_command_log(std::istream& in);
std::vector<CommandRecord> read_command_log(const std::filesystem::path& path);
void write_command_log(std::ostream& out, std::span<const CommandRecord> records);
std::string format_command_record(const CommandRecord& record);
inline constexpr std::string_view kCommandLogHeader = "t_s,mode,supply_left_kpa,supply_right_kpa,speed_mm_s";

}  // namespace vinesim
