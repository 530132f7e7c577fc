#pragma once

#include "vinesim/growth.hpp"
#include "vinesim/schedule.hpp"
#include "vinesim/simulation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vinesim {

// Configuration documents use the display units of the figures (mm, kPa, deg, mm/s);
// everything is converted to SI here. Missing sections fall back to the prototype robot.
//
// {
//   "geometry":    {"d_vine_mm", "l_cpam_mm", "w_cpam_mm", "f_cpam_mm", "cells_per_side",
//                   "cpams_per_valve", "length_correction"},
//   "valve":       {"k_spring_n_per_mm", "x0_mm", "d_ball_mm", "p_max_kpa", "f_magnet_n", "p_vacuum_kpa"},
//   "calibration": "table.csv" | {"points": [[kpa, deg_per_mm], ...]},
//   "tip_mount":   {"speed_mm_s", "magnet_window_mm", "body_pressure_kpa", "risk_threshold_kpa"},
//   "sim":         {"dt_s", "frame_rate_hz", "points_per_segment"}
// }
struct SessionConfig {
    VineConfig vine;
    SimSettings sim;
};

// Throws ValidationError naming the violated invariant.
SessionConfig parse_session_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

struct OutputOptions {
    std::optional<std::filesystem::path> trace;
    std::optional<std::filesystem::path> backbone;
    std::optional<std::filesystem::path> command_log;
    int backbone_points_per_segment = 16;
};

// A session config plus exactly one driver: a command log ("commands" inline or
// "command_log" file) or a full-eversion pressure schedule ("schedule" inline or
// "schedule_file").
struct Scenario {
    std::string name;
    SessionConfig config;
    std::optional<std::vector<CommandRecord>> commands;
    std::optional<PressureSchedule> schedule;
    std::optional<double> duration_s;
    OutputOptions output;
};

// A command message or inline scenario command, fields as in the command log.
CommandRecord command_record_from_json(const nlohmann::json& obj);

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct ScenarioResult {
    std::vector<StateFrame> frames;
    VineState final_state;
    Backbone final_backbone;
    std::vector<CommandRecord> log;
};

// Runs the scenario to completion. Command logs run for `duration_s` (default: one second
// past the last record); schedules run until full eversion.
ScenarioResult run_scenario(const Scenario& scenario);

}  // namespace vinesim
