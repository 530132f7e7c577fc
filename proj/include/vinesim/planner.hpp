#pragma once

#include "vinesim/kinematics.hpp"
#include "vinesim/pneumatics.hpp"
#include "vinesim/schedule.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vinesim {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct TargetPath {
    std::vector<Point2> waypoints;
    double tolerance = 1e-3;

    void validate() const;
};

struct PathScore {
    double mean_error = 0.0;
    double max_error = 0.0;
    double tip_error = 0.0;
};

// Full-eversion forward model: group pressures expanded to per-cPAM bends.
Backbone predict_path(const PressureSchedule& schedule, const RobotGeometry& geometry,
                      const CalibrationCurve& calibration);

double point_to_polyline(const Point2& p, std::span<const Point2> polyline);
std::vector<Point2> polyline_of(const Backbone& backbone);

// Distances from the dense samples of `predicted` (sampled with `points_per_segment`
// intervals when it carries no samples) to the reference polyline.
PathScore score_path(const Backbone& predicted, std::span<const Point2> reference, int points_per_segment = 16);
PathScore score_path(const Backbone& predicted, const Backbone& reference, int points_per_segment = 16);
PathScore score_path(const Backbone& predicted, const TargetPath& reference, int points_per_segment = 16);

struct PlanOptions {
    double p_max = 40e3;
    int points_per_segment = 16;
    double objective_tolerance = 1e-6;  // m, on the RMS sample distance between sweeps
    int max_iterations = 10000;         // coordinate sweeps
    int grid_points = 17;               // coarse scan before each bounded line search
};

struct PlanResult {
    PressureSchedule schedule;
    PathScore score;
    std::vector<double> group_bends;      // signed per-cPAM bend angle of each group, rad
    std::vector<int> saturated_groups;    // 1-based; the unconstrained optimum lies past the bound
    std::vector<double> objective_history;  // mean squared distance after each sweep, m^2
    int iterations = 0;

    bool infeasible() const { return !saturated_groups.empty(); }
};

// Projected coordinate descent over one signed bend per valve group.
PlanResult plan_pressures(const TargetPath& target, const RobotGeometry& geometry, const CalibrationCurve& calibration,
                          int n_groups, const PlanOptions& options = {});

// `x_mm,y_mm`
TargetPath parse_target_csv(std::istream& in);
TargetPath read_target_csv(const std::filesystem::path& path);
void write_target_csv(std::ostream& out, const TargetPath& target);

// `key=value` lines, lengths in mm.
void write_score_report(std::ostream& out, const PathScore& score);

}  // namespace vinesim
