#include "vinesim/growth.hpp"

#include "vinesim/csv.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vinesim {

std::string_view to_string(Mode mode)
{
    switch (mode) {
    case Mode::grow: return "grow";
    case Mode::retract: return "retract";
    case Mode::hold: return "hold";
    }
    return "hold";
}

Mode mode_from_string(std::string_view text)
{
    if (text == "grow") return Mode::grow;
    if (text == "retract") return Mode::retract;
    if (text == "hold") return Mode::hold;
    throw ValidationError("mode", fmt::format("unknown mode '{}'", text));
}

VineConfig VineConfig::prototype()
{
    VineConfig c;
    c.tip = TipMountConfig::for_geometry(c.geometry);
    return c;
}

void VineConfig::validate() const
{
    geometry.validate();
    valves.validate();
    if (!std::isfinite(tip.eversion_speed) || tip.eversion_speed < 0.0) {
        throw ValidationError("tip.speed", "eversion speed must be >= 0");
    }
    if (!(tip.magnet_window > 0.0 && tip.magnet_window <= geometry.l_cpam)) {
        throw ValidationError("tip.magnet_window",
                              fmt::format("magnet window {:.3f} mm must lie in (0, l_cpam = {:.3f} mm]",
                                          units::to_mm(tip.magnet_window), units::to_mm(geometry.l_cpam)));
    }
    if (!std::isfinite(tip.retraction_risk_threshold)) {
        throw ValidationError("tip.risk_threshold", "retraction risk threshold must be finite");
    }
}

VineState VineState::initial(const VineConfig& config)
{
    VineState s;
    s.speed = config.tip.eversion_speed;
    const auto n = static_cast<std::size_t>(config.geometry.groups_per_side());
    s.left.assign(n, ValveState{});
    s.right.assign(n, ValveState{});
    return s;
}

Command Command::merged(const Command& later) const
{
    Command out = *this;
    if (later.set_mode) out.set_mode = later.set_mode;
    if (later.set_supply_left) out.set_supply_left = later.set_supply_left;
    if (later.set_supply_right) out.set_supply_right = later.set_supply_right;
    if (later.set_speed) out.set_speed = later.set_speed;
    return out;
}

void validate_command(const Command& cmd, const VineConfig& config)
{
    const auto& v = config.valves;
    auto check_pressure = [&](const std::optional<double>& p, std::string_view name) {
        if (p && !(*p >= v.p_vacuum && *p <= v.p_max)) {
            throw CommandRejected(fmt::format("{} = {} kPa outside [{}, {}] kPa", name, units::to_kpa(*p),
                                              units::to_kpa(v.p_vacuum), units::to_kpa(v.p_max)));
        }
    };
    check_pressure(cmd.set_supply_left, "supply_left");
    check_pressure(cmd.set_supply_right, "supply_right");
    if (cmd.set_speed && !(std::isfinite(*cmd.set_speed) && *cmd.set_speed >= 0.0)) {
        throw CommandRejected(fmt::format("speed = {} mm/s must be finite and >= 0", units::to_mm(*cmd.set_speed)));
    }
}

double valve_position(int group, const RobotGeometry& geometry)
{
    return static_cast<double>((group + 1) * geometry.cpams_per_valve) * geometry.l_cpam;
}

double advance_tip(double everted, Mode mode, double speed, double dt, const RobotGeometry& geometry)
{
    switch (mode) {
    case Mode::grow: return std::min(geometry.total_length(), everted + speed * dt);
    case Mode::retract: return std::max(0.0, everted - speed * dt);
    case Mode::hold: return everted;
    }
    return everted;
}

StepResult step(const VineState& state, double dt, const Command& cmd, const VineConfig& config)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw CommandRejected("time step must be positive");
    validate_command(cmd, config);

    const auto& geo = config.geometry;
    StepResult out{state, {}};
    VineState& next = out.state;
    if (cmd.set_mode) next.mode = *cmd.set_mode;
    if (cmd.set_supply_left) next.supply_left = *cmd.set_supply_left;
    if (cmd.set_supply_right) next.supply_right = *cmd.set_supply_right;
    if (cmd.set_speed) next.speed = *cmd.set_speed;

    const double old_tip = state.everted_length;
    const double tip = advance_tip(old_tip, next.mode, next.speed, dt, geo);
    next.everted_length = tip;

    const double half_window = config.tip.magnet_window / 2.0;
    const int groups = geo.groups_per_side();
    for (int g = 0; g < groups; ++g) {
        const double pos = valve_position(g, geo);
        const bool everted = pos <= tip;
        bool magnet = std::abs(tip - pos) <= half_window;
        // A valve drawn back through the tip mount always meets the magnet on its way in.
        if (next.mode == Mode::retract && old_tip >= pos && tip < pos) magnet = true;

        if (next.mode == Mode::grow && old_tip < pos && tip > pos + half_window) {
            out.warnings.push_back(fmt::format("skipped_valve group={} tip_advance_mm={:.3f} window_mm={:.3f}", g + 1,
                                               units::to_mm(tip - old_tip), units::to_mm(config.tip.magnet_window)));
        }
        for (Side side : {Side::left, Side::right}) {
            auto& valve = side == Side::left ? next.left[g] : next.right[g];
            double supply = side == Side::left ? next.supply_left : next.supply_right;
            // Pouches that are not fully everted can be vented but never inflated.
            if (!everted) supply = std::min(supply, 0.0);
            valve = valve_step(valve, magnet, supply, config.valves);
        }
    }

    next.time = state.time + dt;
    next.ticks = state.ticks + 1;
    return out;
}

std::vector<Segment> cell_segments(std::span<const double> left_pressure, std::span<const double> right_pressure,
                                   double partial_length, const RobotGeometry& geometry,
                                   const CalibrationCurve& calibration)
{
    const double seg_len = geometry.l_cpam * geometry.length_correction;
    std::vector<Segment> segs;
    segs.reserve(left_pressure.size() + 1);
    for (std::size_t i = 0; i < left_pressure.size(); ++i) {
        const double bend = calibration.bend_from_pressure(left_pressure[i]) -
                            calibration.bend_from_pressure(right_pressure[i]);
        segs.push_back(make_segment(bend * geometry.l_cpam, seg_len));
    }
    if (partial_length > 0.0) segs.push_back(make_segment(0.0, partial_length * geometry.length_correction));
    return segs;
}

Backbone shape(const VineState& state, const VineConfig& config)
{
    const auto& geo = config.geometry;
    std::vector<double> left;
    std::vector<double> right;
    double partial = 0.0;
    for (int i = 0; i < geo.cells_per_side; ++i) {
        const double start = static_cast<double>(i) * geo.l_cpam;
        const double end = static_cast<double>(i + 1) * geo.l_cpam;
        if (state.everted_length >= end) {
            const auto g = static_cast<std::size_t>(i / geo.cpams_per_valve);
            left.push_back(state.left[g].held_pressure);
            right.push_back(state.right[g].held_pressure);
        } else {
            partial = std::max(0.0, state.everted_length - start);
            break;
        }
    }
    const auto segs = cell_segments(left, right, partial, geo, config.calibration);
    return chain_pose(segs, geo);
}

std::vector<RiskEntry> check_retraction_risk(const VineState& state, const VineConfig& config)
{
    std::vector<RiskEntry> out;
    if (state.mode != Mode::retract) return out;
    const auto& geo = config.geometry;
    for (int i = 0; i < geo.cells_per_side; ++i) {
        if (static_cast<double>(i) * geo.l_cpam >= state.everted_length) break;
        const auto g = static_cast<std::size_t>(i / geo.cpams_per_valve);
        for (Side side : {Side::left, Side::right}) {
            const double p = state.valves(side)[g].held_pressure;
            if (p > config.tip.retraction_risk_threshold) out.push_back({i, side, p});
        }
    }
    return out;
}

Command CommandRecord::to_command() const
{
    Command c;
    c.set_mode = mode;
    if (supply_left_kpa) c.set_supply_left = units::kpa(*supply_left_kpa);
    if (supply_right_kpa) c.set_supply_right = units::kpa(*supply_right_kpa);
    if (speed_mm_s) c.set_speed = units::mm(*speed_mm_s);
    return c;
}

std::vector<CommandRecord> parse_command_log(std::istream& in)
{
    const auto rows = csv::read_rows(in, {"t_s", "mode", "supply_left_kpa", "supply_right_kpa", "speed_mm_s"});
    std::vector<CommandRecord> out;
    out.reserve(rows.size());
    std::size_t n = 0;
    for (const auto& row : rows) {
        ++n;
        auto optional_number = [&](const std::string& f) -> std::optional<double> {
            if (f.empty()) return std::nullopt;
            return csv::parse_double(f, n);
        };
        CommandRecord r;
        r.t_s = csv::parse_double(row[0], n);
        if (!row[1].empty()) r.mode = mode_from_string(row[1]);
        r.supply_left_kpa = optional_number(row[2]);
        r.supply_right_kpa = optional_number(row[3]);
        r.speed_mm_s = optional_number(row[4]);
        if (r.t_s < 0.0 || (!out.empty() && r.t_s < out.back().t_s)) {
            throw ValidationError("command_log.time_order", fmt::format("row {}: times must be non-negative and sorted", n));
        }
        out.push_back(r);
    }
    return out;
}

std::vector<CommandRecord> read_command_log(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open command log '{}'", path.string()));
    return parse_command_log(in);
}

std::string format_command_record(const CommandRecord& r)
{
    auto num = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string{}; };
    return fmt::format("{},{},{},{},{}", r.t_s, r.mode ? to_string(*r.mode) : std::string_view{}, num(r.supply_left_kpa),
                       num(r.supply_right_kpa), num(r.speed_mm_s));
}

void write_command_log(std::ostream& out, std::span<const CommandRecord> records)
{
    out << kCommandLogHeader << '\n';
    for (const auto& r : records) out << format_command_record(r) << '\n';
}

}  // namespace vinesim
