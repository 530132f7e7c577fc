#include "vinesim/config.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/planner.hpp"
#include "vinesim/service.hpp"
#include "vinesim/units.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace vinesim;

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kIo = 2, kInfeasible = 3 };

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// Bundled scenario names resolve against the shipped scenario directory.
fs::path resolve_scenario(const std::string& arg)
{
    fs::path p(arg);
    if (fs::exists(p)) return p;
    const fs::path bundled = fs::path(VINESIM_SCENARIO_DIR) / (arg + ".json");
    return fs::exists(bundled) ? bundled : p;
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("config.json", fmt::format("'{}' is not valid JSON", path.string()));
    return doc;
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

struct SimulateArgs {
    std::string scenario;
    std::string trace;
    std::string backbone;
    std::string record;
};

int run_simulate(const SimulateArgs& a)
{
    Scenario sc = load_scenario(resolve_scenario(a.scenario));
    if (!a.trace.empty()) sc.output.trace = a.trace;
    if (!a.backbone.empty()) sc.output.backbone = a.backbone;
    if (!a.record.empty()) sc.output.command_log = a.record;

    const ScenarioResult res = run_scenario(sc);
    if (sc.output.trace) {
        auto out = open_out(*sc.output.trace);
        write_frame_trace_header(out, sc.config.vine.geometry.groups_per_side());
        for (const auto& f : res.frames) write_frame_trace_row(out, f);
    }
    if (sc.output.backbone) {
        auto out = open_out(*sc.output.backbone);
        write_backbone_csv(out, res.final_backbone);
    }
    if (sc.output.command_log) {
        auto out = open_out(*sc.output.command_log);
        write_command_log(out, res.log);
    }
    const auto& tip = res.final_backbone.tip();
    fmt::print("scenario={}\nticks={}\neverted_mm={:.6f}\ntip_x_mm={:.6f}\ntip_y_mm={:.6f}\nfinal_heading_deg={:.6f}\n",
               sc.name, res.final_state.ticks, units::to_mm(res.final_state.everted_length), units::to_mm(tip.x),
               units::to_mm(tip.y), units::to_deg(tip.theta));
    return kOk;
}

SessionConfig load_config(const std::string& path)
{
    if (path.empty()) return parse_session_config(nlohmann::json::object());
    const fs::path p(path);
    return parse_session_config(read_json(p), p.parent_path());
}

struct PlanArgs {
    std::string target;
    std::string config;
    int groups = 0;
    std::string schedule_out = "schedule.csv";
    std::string report_out;
};

int run_plan(const PlanArgs& a)
{
    const SessionConfig cfg = load_config(a.config);
    const TargetPath target = read_target_csv(a.target);
    const auto& geo = cfg.vine.geometry;
    PlanOptions opts;
    opts.p_max = cfg.vine.valves.p_max;
    const int groups = a.groups > 0 ? a.groups : geo.groups_per_side();
    const PlanResult plan = plan_pressures(target, geo, cfg.vine.calibration, groups, opts);

    {
        auto out = open_out(a.schedule_out);
        write_schedule_csv(out, plan.schedule);
    }
    if (!a.report_out.empty()) {
        auto out = open_out(a.report_out);
        write_score_report(out, plan.score);
        fmt::print(out, "iterations={}\ninfeasible={}\n", plan.iterations, plan.infeasible());
    }
    write_score_report(std::cout, plan.score);
    fmt::print("iterations={}\n", plan.iterations);
    if (plan.infeasible()) {
        fmt::print(std::cerr, "warning: target needs more curvature than the pouches deliver; saturated groups: {}\n",
                   fmt::join(plan.saturated_groups, ","));
        return kInfeasible;
    }
    return kOk;
}

struct PredictArgs {
    std::string schedule;
    std::string config;
    std::string backbone_out;
    int points = 16;
};

int run_predict(const PredictArgs& a)
{
    const SessionConfig cfg = load_config(a.config);
    const PressureSchedule s = read_schedule_csv(a.schedule);
    s.validate(cfg.vine.valves.p_max);
    const Backbone bb = sample_backbone(predict_path(s, cfg.vine.geometry, cfg.vine.calibration), a.points);
    if (!a.backbone_out.empty()) {
        auto out = open_out(a.backbone_out);
        write_backbone_csv(out, bb);
    } else {
        write_backbone_csv(std::cout, bb);
    }
    return kOk;
}

struct CalibrateArgs {
    std::string table;
    std::string out;
};

int run_calibrate(const CalibrateArgs& a)
{
    const CalibrationCurve curve = read_calibration_csv(a.table);
    if (a.out.empty()) {
        write_calibration_csv_si(std::cout, curve);
    } else {
        auto out = open_out(a.out);
        write_calibration_csv_si(out, curve);
    }
    fmt::print(std::cerr, "calibration ok: {} points, max {:.4f} deg/mm at {:.3f} kPa\n", curve.points().size(),
               units::to_deg_per_mm(curve.max_bend()), units::to_kpa(curve.max_pressure()));
    return kOk;
}

struct ServeArgs {
    std::string config;
    std::string addr;
    std::string record_dir;
    int threads = 2;
};

int run_serve(const ServeArgs& a)
{
    std::optional<std::string> config_addr;
    service::CoreOptions core;
    if (!a.config.empty()) {
        const fs::path p(a.config);
        const auto doc = read_json(p);
        parse_session_config(doc, p.parent_path());
        if (doc.contains("service")) {
            const auto& s = doc.at("service");
            if (s.contains("addr")) config_addr = s.at("addr").get<std::string>();
            if (s.contains("record_dir")) core.record_dir = s.at("record_dir").get<std::string>();
        }
    }
    if (!a.record_dir.empty()) core.record_dir = a.record_dir;
    if (core.record_dir) fs::create_directories(*core.record_dir);

    const auto addr = service::resolve_address(a.addr.empty() ? std::nullopt : std::optional(a.addr),
                                               std::getenv(service::kAddressEnv), config_addr);
    service::Server server(service::parse_endpoint(addr), core, a.threads);
    server.start();
    fmt::print("listening on {}\n", addr.substr(0, addr.rfind(':')) + ":" + std::to_string(server.port()));
    std::cout.flush();

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    spdlog::info("shutting down");
    server.stop();
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Planar simulator and pressure planner for multi-segment vine robots"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario (command log or pressure schedule)");
    simulate->add_option("scenario", sim.scenario, "Scenario JSON file or bundled name (fig9a, fig9b, fig9c)")->required();
    simulate->add_option("--trace", sim.trace, "Frame trace CSV output");
    simulate->add_option("--backbone", sim.backbone, "Final backbone CSV output");
    simulate->add_option("--record", sim.record, "Write the applied command log");

    PlanArgs plan;
    auto* plan_cmd = app.add_subcommand("plan", "Plan group pressures for a target path");
    plan_cmd->add_option("target", plan.target, "Target CSV (x_mm,y_mm)")->required();
    plan_cmd->add_option("--config", plan.config, "Robot configuration JSON");
    plan_cmd->add_option("--groups", plan.groups, "Number of valve groups to plan (default: all)");
    plan_cmd->add_option("--schedule", plan.schedule_out, "Schedule CSV output")->capture_default_str();
    plan_cmd->add_option("--report", plan.report_out, "Score report output");

    PredictArgs pred;
    auto* predict = app.add_subcommand("predict", "Forward-predict the backbone of a pressure schedule");
    predict->add_option("schedule", pred.schedule, "Schedule CSV (group_id,side,pressure_kpa)")->required();
    predict->add_option("--config", pred.config, "Robot configuration JSON");
    predict->add_option("--backbone", pred.backbone_out, "Backbone CSV output (default: stdout)");
    predict->add_option("--points", pred.points, "Samples per cPAM")->check(CLI::PositiveNumber);

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Validate a calibration table and emit it in SI units");
    calibrate->add_option("table", cal.table, "Calibration CSV (pressure_kpa,bend_deg_per_mm)")->required();
    calibrate->add_option("--out", cal.out, "Normalized SI table output (default: stdout)");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the live steering service");
    serve_cmd->add_option("--config", serve.config, "Service configuration JSON");
    serve_cmd->add_option("--addr", serve.addr, "Listen address host:port (overrides VINESIM_ADDR)");
    serve_cmd->add_option("--record-dir", serve.record_dir, "Write each closed session's command log here");
    serve_cmd->add_option("--threads", serve.threads, "I/O threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return run_simulate(sim);
        if (*plan_cmd) return run_plan(plan);
        if (*predict) return run_predict(pred);
        if (*calibrate) return run_calibrate(cal);
        if (*serve_cmd) return run_serve(serve);
    } catch (const ValidationError& e) {
        fmt::print(std::cerr, "error [{}]: {}\n", e.invariant(), e.what());
        return kValidation;
    } catch (const DomainError& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kValidation;
    } catch (const IoError& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kIo;
    } catch (const fs::filesystem_error& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kIo;
    }
    return kOk;
}
