#include "vinesim/config.hpp"

#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace vinesim {

using nlohmann::json;

namespace {

double number(const json& obj, const char* key, double fallback)
{
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(fmt::format("config.{}", key), fmt::format("'{}' must be a number", key));
    return v.get<double>();
}

int integer(const json& obj, const char* key, int fallback)
{
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ValidationError(fmt::format("config.{}", key), fmt::format("'{}' must be an integer", key));
    return v.get<int>();
}

const json& section(const json& doc, const char* key)
{
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    const auto& s = doc.at(key);
    if (!s.is_object()) throw ValidationError(fmt::format("config.{}", key), fmt::format("'{}' must be an object", key));
    return s;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

CalibrationCurve parse_calibration(const json& doc, const std::filesystem::path& base)
{
    if (!doc.contains("calibration") || doc.at("calibration").is_null()) return CalibrationCurve{};
    const auto& c = doc.at("calibration");
    if (c.is_string()) return read_calibration_csv(resolve(base, c.get<std::string>()));
    if (c.is_object() && c.contains("points") && c.at("points").is_array()) {
        std::vector<CalibrationPoint> pts;
        for (const auto& row : c.at("points")) {
            if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
                throw ValidationError("calibration.points", "calibration points must be [kpa, deg_per_mm] pairs");
            }
            pts.push_back({units::kpa(row[0].get<double>()), units::deg_per_mm(row[1].get<double>())});
        }
        return CalibrationCurve(std::move(pts));
    }
    throw ValidationError("calibration", "calibration must be a CSV path or {\"points\": [...]}");
}

std::optional<double> optional_number(const json& obj, const char* key)
{
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_number()) throw ValidationError(fmt::format("command.{}", key), fmt::format("'{}' must be a number", key));
    return obj.at(key).get<double>();
}

}  // namespace

SessionConfig parse_session_config(const json& doc, const std::filesystem::path& base_dir)
{
    if (!doc.is_object()) throw ValidationError("config", "configuration must be a JSON object");
    SessionConfig out;
    auto& v = out.vine;

    const auto& g = section(doc, "geometry");
    const RobotGeometry proto;
    v.geometry.d_vine = units::mm(number(g, "d_vine_mm", units::to_mm(proto.d_vine)));
    v.geometry.l_cpam = units::mm(number(g, "l_cpam_mm", units::to_mm(proto.l_cpam)));
    v.geometry.w_cpam = units::mm(number(g, "w_cpam_mm", units::to_mm(proto.w_cpam)));
    v.geometry.f_cpam = units::mm(number(g, "f_cpam_mm", units::to_mm(proto.f_cpam)));
    v.geometry.cells_per_side = integer(g, "cells_per_side", proto.cells_per_side);
    v.geometry.cpams_per_valve = integer(g, "cpams_per_valve", proto.cpams_per_valve);
    v.geometry.length_correction = number(g, "length_correction", proto.length_correction);

    const auto& vp = section(doc, "valve");
    const ValveParams vproto;
    v.valves.k_spring = units::n_per_mm(number(vp, "k_spring_n_per_mm", vproto.k_spring * 1e-3));
    v.valves.x0 = units::mm(number(vp, "x0_mm", units::to_mm(vproto.x0)));
    v.valves.d_ball = units::mm(number(vp, "d_ball_mm", units::to_mm(vproto.d_ball)));
    v.valves.p_max = units::kpa(number(vp, "p_max_kpa", units::to_kpa(vproto.p_max)));
    v.valves.f_magnet = number(vp, "f_magnet_n", vproto.f_magnet);
    v.valves.p_vacuum = units::kpa(number(vp, "p_vacuum_kpa", units::to_kpa(vproto.p_vacuum)));

    v.calibration = parse_calibration(doc, base_dir);

    const auto& t = section(doc, "tip_mount");
    const TipMountConfig tproto = TipMountConfig::for_geometry(v.geometry);
    v.tip.eversion_speed = units::mm(number(t, "speed_mm_s", units::to_mm(tproto.eversion_speed)));
    v.tip.magnet_window = units::mm(number(t, "magnet_window_mm", units::to_mm(tproto.magnet_window)));
    v.tip.body_pressure = units::kpa(number(t, "body_pressure_kpa", units::to_kpa(tproto.body_pressure)));
    v.tip.retraction_risk_threshold =
        units::kpa(number(t, "risk_threshold_kpa", units::to_kpa(tproto.retraction_risk_threshold)));

    const auto& s = section(doc, "sim");
    out.sim.dt = number(s, "dt_s", out.sim.dt);
    out.sim.frame_rate_hz = integer(s, "frame_rate_hz", out.sim.frame_rate_hz);
    out.sim.frame_points_per_segment = integer(s, "points_per_segment", out.sim.frame_points_per_segment);

    v.validate();
    out.sim.validate();
    return out;
}

CommandRecord command_record_from_json(const json& obj)
{
    if (!obj.is_object()) throw ValidationError("command", "command must be an object");
    CommandRecord r;
    r.t_s = number(obj, "t_s", 0.0);
    if (obj.contains("mode") && !obj.at("mode").is_null()) {
        if (!obj.at("mode").is_string()) throw ValidationError("command.mode", "'mode' must be a string");
        r.mode = mode_from_string(obj.at("mode").get<std::string>());
    }
    r.supply_left_kpa = optional_number(obj, "supply_left_kpa");
    r.supply_right_kpa = optional_number(obj, "supply_right_kpa");
    r.speed_mm_s = optional_number(obj, "speed_mm_s");
    return r;
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir)
{
    Scenario sc;
    sc.config = parse_session_config(doc, base_dir);
    sc.name = doc.value("name", std::string{});

    const bool has_commands = doc.contains("commands") || doc.contains("command_log");
    const bool has_schedule = doc.contains("schedule") || doc.contains("schedule_file");
    if (has_commands == has_schedule) {
        throw ValidationError("scenario.driver", "scenario needs exactly one of a command log or a pressure schedule");
    }
    if (doc.contains("commands") && doc.contains("command_log")) {
        throw ValidationError("scenario.driver", "give either inline 'commands' or a 'command_log' file, not both");
    }
    if (doc.contains("schedule") && doc.contains("schedule_file")) {
        throw ValidationError("scenario.driver", "give either an inline 'schedule' or a 'schedule_file', not both");
    }

    if (doc.contains("commands")) {
        if (!doc.at("commands").is_array()) throw ValidationError("scenario.commands", "'commands' must be an array");
        std::vector<CommandRecord> records;
        for (const auto& c : doc.at("commands")) records.push_back(command_record_from_json(c));
        sc.commands = std::move(records);
    } else if (doc.contains("command_log")) {
        sc.commands = read_command_log(resolve(base_dir, doc.at("command_log").get<std::string>()));
    }
    if (sc.commands) {
        for (std::size_t i = 0; i < sc.commands->size(); ++i) {
            const auto& r = (*sc.commands)[i];
            if (r.t_s < 0.0 || (i > 0 && r.t_s < (*sc.commands)[i - 1].t_s)) {
                throw ValidationError("scenario.commands.time_order", "command times must be non-negative and sorted");
            }
            try {
                validate_command(r.to_command(), sc.config.vine);
            } catch (const CommandRejected& e) {
                throw ValidationError("scenario.commands.range", fmt::format("command {}: {}", i + 1, e.what()));
            }
        }
    }

    if (doc.contains("schedule")) {
        if (!doc.at("schedule").is_array()) throw ValidationError("scenario.schedule", "'schedule' must be an array");
        PressureSchedule s;
        for (const auto& e : doc.at("schedule")) {
            if (!e.is_object() || !e.contains("group") || !e.contains("side") || !e.contains("pressure_kpa")) {
                throw ValidationError("scenario.schedule", "schedule entries need group, side and pressure_kpa");
            }
            s.entries.push_back({e.at("group").get<int>(), side_from_string(e.at("side").get<std::string>()),
                                 units::kpa(e.at("pressure_kpa").get<double>())});
        }
        sc.schedule = std::move(s);
    } else if (doc.contains("schedule_file")) {
        sc.schedule = read_schedule_csv(resolve(base_dir, doc.at("schedule_file").get<std::string>()));
    }
    if (sc.schedule) {
        sc.schedule->validate(sc.config.vine.valves.p_max);
        if (sc.schedule->group_count() > sc.config.vine.geometry.groups_per_side()) {
            throw ValidationError("scenario.schedule.groups",
                                  fmt::format("schedule has {} groups but the robot only {}", sc.schedule->group_count(),
                                              sc.config.vine.geometry.groups_per_side()));
        }
    }

    if (doc.contains("duration_s")) {
        sc.duration_s = number(doc, "duration_s", 0.0);
        if (!(*sc.duration_s >= 0.0)) throw ValidationError("scenario.duration", "duration must be >= 0");
    }

    const auto& o = section(doc, "output");
    if (o.contains("trace")) sc.output.trace = o.at("trace").get<std::string>();
    if (o.contains("backbone")) sc.output.backbone = o.at("backbone").get<std::string>();
    if (o.contains("command_log")) sc.output.command_log = o.at("command_log").get<std::string>();
    sc.output.backbone_points_per_segment = integer(o, "points_per_segment", sc.output.backbone_points_per_segment);
    if (sc.output.backbone_points_per_segment < 1) throw ValidationError("output.points_per_segment", "need >= 1");
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open scenario '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("scenario.json", fmt::format("{}: {}", path.string(), e.what()));
    }
    Scenario sc = parse_scenario(doc, path.parent_path());
    if (sc.name.empty()) sc.name = path.stem().string();
    return sc;
}

ScenarioResult run_scenario(const Scenario& scenario)
{
    Simulation sim(scenario.config.vine, scenario.config.sim);
    ScenarioResult out;
    constexpr std::int64_t kTickCap = 100'000'000;

    if (scenario.commands) {
        const auto& log = *scenario.commands;
        const double last = log.empty() ? 0.0 : log.back().t_s;
        const double duration = scenario.duration_s.value_or(last + 1.0);
        const std::int64_t ticks = sim.tick_of(duration);
        if (ticks > kTickCap) throw ValidationError("scenario.duration", "scenario too long");
        std::size_t next = 0;
        for (std::int64_t t = 0; t < ticks; ++t) {
            while (next < log.size() && sim.tick_of(log[next].t_s) <= t) sim.enqueue(log[next++]);
            if (auto f = sim.tick()) out.frames.push_back(std::move(*f));
        }
    } else {
        const auto& geo = scenario.config.vine.geometry;
        if (!(scenario.config.vine.tip.eversion_speed > 0.0)) {
            throw ValidationError("scenario.speed", "schedule replay needs a positive eversion speed");
        }
        std::int64_t t = 0;
        while (sim.snapshot().everted_length < geo.total_length()) {
            if (++t > kTickCap) throw ValidationError("scenario.duration", "schedule did not finish");
            if (auto cmd = schedule_command(sim.snapshot(), *scenario.schedule, scenario.config.vine, scenario.config.sim)) {
                sim.enqueue(*cmd);
            }
            if (auto f = sim.tick()) out.frames.push_back(std::move(*f));
        }
    }
    if (out.frames.empty() || out.frames.back().tick != sim.ticks()) out.frames.push_back(sim.frame_now());

    out.final_state = sim.snapshot();
    out.final_backbone = sample_backbone(shape(out.final_state, scenario.config.vine), scenario.output.backbone_points_per_segment);
    out.log = sim.command_log();
    return out;
}

}  // namespace vinesim
