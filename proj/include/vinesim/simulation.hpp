#pragma once

#include "vinesim/growth.hpp"
#include "vinesim/schedule.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vinesim {

struct SimSettings {
    double dt = 0.010;
    int frame_rate_hz = 30;
    int frame_points_per_segment = 4;

    void validate() const;
};

struct PouchReading {
    int group = 1;  // 1-based
    Side side = Side::left;
    double kpa = 0.0;
};

// Snapshot handed to observers. Display units (mm, kPa, deg).
struct StateFrame {
    std::int64_t tick = 0;
    double t_s = 0.0;
    double everted_mm = 0.0;
    Mode mode = Mode::hold;
    double supply_left_kpa = 0.0;
    double supply_right_kpa = 0.0;
    double speed_mm_s = 0.0;
    std::vector<PouchReading> pouches;
    std::vector<std::array<double, 2>> backbone_mm;
    PlanarPose tip;  // SI
    std::vector<std::string> warnings;
};

StateFrame make_frame(const VineState& state, const VineConfig& config, const SimSettings& settings,
                      std::vector<std::string> warnings = {});

nlohmann::json frame_to_json(const StateFrame& frame, const std::string& session_id);

// Frame trace CSV: one row per frame, tip pose instead of the full polyline.
void write_frame_trace_header(std::ostream& out, int groups_per_side);
void write_frame_trace_row(std::ostream& out, const StateFrame& frame);

// Backbone CSV `s_mm,x_mm,y_mm,theta_deg` from a sampled backbone.
void write_backbone_csv(std::ostream& out, const Backbone& backbone);

// Fixed-step simulation with a serialized command queue. Any thread may enqueue; one
// thread drives tick(). Every applied command is recorded with the tick time at which it
// took effect, so the log replays to identical frames.
class Simulation {
public:
    Simulation(VineConfig config, SimSettings settings);

    // Returns the simulation time at which the command will apply. Throws CommandRejected.
    double enqueue(CommandRecord record);

    // Advances one step; returns a frame when one is due at the new time.
    std::optional<StateFrame> tick();
    // Frame for the current state outside the regular cadence (warnings since the last frame included).
    StateFrame frame_now();

    VineState snapshot() const;
    std::vector<CommandRecord> command_log() const;
    std::int64_t ticks() const;
    const VineConfig& config() const { return config_; }
    const SimSettings& settings() const { return settings_; }
    double tick_time(std::int64_t tick) const { return static_cast<double>(tick) * settings_.dt; }
    std::int64_t tick_of(double t_s) const;

private:
    bool frame_due(std::int64_t tick) const;

    VineConfig config_;
    SimSettings settings_;
    std::int64_t dt_ns_;

    mutable std::mutex mutex_;
    std::deque<CommandRecord> pending_;
    VineState state_;
    std::vector<CommandRecord> log_;
    std::vector<std::string> warnings_;
    std::int64_t next_frame_ = 1;
};

// Drives a simulation from a recorded log for `ticks` steps and returns every frame.
std::vector<StateFrame> replay(const VineConfig& config, const SimSettings& settings,
                               std::span<const CommandRecord> log, std::int64_t ticks);

// Supplies that apply a full-eversion schedule while growing: before each step the
// supplies are set to the schedule of the valve group nearest the next tip position.
std::optional<CommandRecord> schedule_command(const VineState& state, const PressureSchedule& schedule,
                                              const VineConfig& config, const SimSettings& settings);

}  // namespace vinesim
