#include "vinesim/simulation.hpp"

#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <ostream>

namespace vinesim {

void SimSettings::validate() const
{
    if (!(dt > 0.0 && std::isfinite(dt))) throw ValidationError("sim.dt", "tick dt must be positive");
    if (frame_rate_hz < 1) throw ValidationError("sim.frame_rate", "frame rate must be >= 1 Hz");
    if (frame_points_per_segment < 1) throw ValidationError("sim.points_per_segment", "need >= 1 point per segment");
}

StateFrame make_frame(const VineState& state, const VineConfig& config, const SimSettings& settings,
                      std::vector<std::string> warnings)
{
    StateFrame f;
    f.tick = state.ticks;
    f.t_s = static_cast<double>(state.ticks) * settings.dt;
    f.everted_mm = units::to_mm(state.everted_length);
    f.mode = state.mode;
    f.supply_left_kpa = units::to_kpa(state.supply_left);
    f.supply_right_kpa = units::to_kpa(state.supply_right);
    f.speed_mm_s = units::to_mm(state.speed);
    for (Side side : {Side::left, Side::right}) {
        const auto& valves = state.valves(side);
        for (std::size_t g = 0; g < valves.size(); ++g) {
            f.pouches.push_back({static_cast<int>(g) + 1, side, units::to_kpa(valves[g].held_pressure)});
        }
    }
    const Backbone bb = sample_backbone(shape(state, config), settings.frame_points_per_segment);
    f.tip = bb.tip();
    for (const auto& p : *bb.samples) f.backbone_mm.push_back({units::to_mm(p.x), units::to_mm(p.y)});
    for (const auto& r : check_retraction_risk(state, config)) {
        warnings.push_back(fmt::format("retraction_risk cell={} side={} kpa={:.3f}", r.cell + 1, to_string(r.side),
                                       units::to_kpa(r.pressure)));
    }
    f.warnings = std::move(warnings);
    return f;
}

nlohmann::json frame_to_json(const StateFrame& frame, const std::string& session_id)
{
    nlohmann::json pouches = nlohmann::json::array();
    for (const auto& p : frame.pouches) {
        pouches.push_back({{"group", p.group}, {"side", to_string(p.side)}, {"kpa", p.kpa}});
    }
    return {
        {"type", "frame"},
        {"session", session_id},
        {"t_s", frame.t_s},
        {"everted_mm", frame.everted_mm},
        {"mode", to_string(frame.mode)},
        {"supply_left_kpa", frame.supply_left_kpa},
        {"supply_right_kpa", frame.supply_right_kpa},
        {"speed_mm_s", frame.speed_mm_s},
        {"backbone_mm", frame.backbone_mm},
        {"tip_theta_deg", units::to_deg(frame.tip.theta)},
        {"pouches", std::move(pouches)},
        {"warnings", frame.warnings},
    };
}

void write_frame_trace_header(std::ostream& out, int groups_per_side)
{
    out << "t_s,everted_mm,mode,supply_left_kpa,supply_right_kpa,speed_mm_s,tip_x_mm,tip_y_mm,tip_theta_deg";
    for (const char* side : {"left", "right"}) {
        for (int g = 1; g <= groups_per_side; ++g) fmt::print(out, ",{}{}_kpa", side, g);
    }
    out << ",warnings\n";
}

void write_frame_trace_row(std::ostream& out, const StateFrame& f)
{
    fmt::print(out, "{:.6f},{:.6f},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}", f.t_s, f.everted_mm, to_string(f.mode),
               f.supply_left_kpa, f.supply_right_kpa, f.speed_mm_s, units::to_mm(f.tip.x), units::to_mm(f.tip.y),
               units::to_deg(f.tip.theta));
    for (const auto& p : f.pouches) fmt::print(out, ",{:.6f}", p.kpa);
    out << ',' << fmt::format("{}", fmt::join(f.warnings, ";")) << '\n';
}

void write_backbone_csv(std::ostream& out, const Backbone& backbone)
{
    out << "s_mm,x_mm,y_mm,theta_deg\n";
    const Backbone sampled = backbone.samples ? backbone : sample_backbone(backbone, 1);
    for (const auto& p : *sampled.samples) {
        fmt::print(out, "{:.6f},{:.6f},{:.6f},{:.6f}\n", units::to_mm(p.s), units::to_mm(p.x), units::to_mm(p.y),
                   units::to_deg(p.theta));
    }
}

Simulation::Simulation(VineConfig config, SimSettings settings)
    : config_(std::move(config)), settings_(settings), dt_ns_(0), state_(VineState::initial(config_))
{
    config_.validate();
    settings_.validate();
    dt_ns_ = std::llround(settings_.dt * 1e9);
    if (dt_ns_ < 1) throw ValidationError("sim.dt", "tick dt below 1 ns");
}

double Simulation::enqueue(CommandRecord record)
{
    validate_command(record.to_command(), config_);
    std::lock_guard lock(mutex_);
    record.t_s = tick_time(state_.ticks);
    pending_.push_back(record);
    return record.t_s;
}

std::int64_t Simulation::tick_of(double t_s) const { return std::llround(t_s / settings_.dt); }

bool Simulation::frame_due(std::int64_t tick) const
{
    return static_cast<__int128>(tick) * dt_ns_ * settings_.frame_rate_hz >=
           static_cast<__int128>(next_frame_) * 1'000'000'000;
}

std::optional<StateFrame> Simulation::tick()
{
    // Held for the whole step so a concurrent enqueue() always stamps the tick it lands in.
    std::lock_guard lock(mutex_);
    Command cmd;
    for (const auto& r : pending_) cmd = cmd.merged(r.to_command());
    StepResult result = step(state_, settings_.dt, cmd, config_);

    state_ = std::move(result.state);
    log_.insert(log_.end(), pending_.begin(), pending_.end());
    pending_.clear();
    warnings_.insert(warnings_.end(), result.warnings.begin(), result.warnings.end());
    if (!frame_due(state_.ticks)) return std::nullopt;
    while (frame_due(state_.ticks)) ++next_frame_;
    auto frame = make_frame(state_, config_, settings_, std::move(warnings_));
    warnings_.clear();
    return frame;
}

StateFrame Simulation::frame_now()
{
    std::lock_guard lock(mutex_);
    auto frame = make_frame(state_, config_, settings_, std::move(warnings_));
    warnings_.clear();
    return frame;
}

VineState Simulation::snapshot() const
{
    std::lock_guard lock(mutex_);
    return state_;
}

std::vector<CommandRecord> Simulation::command_log() const
{
    std::lock_guard lock(mutex_);
    return log_;
}

std::int64_t Simulation::ticks() const
{
    std::lock_guard lock(mutex_);
    return state_.ticks;
}

std::vector<StateFrame> replay(const VineConfig& config, const SimSettings& settings, std::span<const CommandRecord> log,
                               std::int64_t ticks)
{
    Simulation sim(config, settings);
    std::vector<StateFrame> frames;
    std::size_t next = 0;
    for (std::int64_t t = 0; t < ticks; ++t) {
        while (next < log.size() && sim.tick_of(log[next].t_s) <= t) sim.enqueue(log[next++]);
        if (auto f = sim.tick()) frames.push_back(std::move(*f));
    }
    return frames;
}

std::optional<CommandRecord> schedule_command(const VineState& state, const PressureSchedule& schedule,
                                              const VineConfig& config, const SimSettings& settings)
{
    const auto& geo = config.geometry;
    const double tip = advance_tip(state.everted_length, Mode::grow, state.speed, settings.dt, geo);
    const int groups = geo.groups_per_side();
    const double half_group = static_cast<double>(geo.cpams_per_valve) * geo.l_cpam / 2.0;
    int g = 0;
    while (g + 1 < groups && tip > valve_position(g, geo) + half_group) ++g;

    const auto left = schedule.pressures(Side::left);
    const auto right = schedule.pressures(Side::right);
    const auto gi = static_cast<std::size_t>(g);
    const double want_left = gi < left.size() ? left[gi] : 0.0;
    const double want_right = gi < right.size() ? right[gi] : 0.0;

    CommandRecord r;
    if (state.mode != Mode::grow) r.mode = Mode::grow;
    const double left_kpa = units::to_kpa(want_left);
    const double right_kpa = units::to_kpa(want_right);
    if (units::kpa(left_kpa) != state.supply_left) r.supply_left_kpa = left_kpa;
    if (units::kpa(right_kpa) != state.supply_right) r.supply_right_kpa = right_kpa;
    if (!r.mode && !r.supply_left_kpa && !r.supply_right_kpa) return std::nullopt;
    return r;
}

}  // namespace vinesim
