#include "vinesim/planner.hpp"

#include "vinesim/csv.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/growth.hpp"
#include "vinesim/units.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace vinesim {

void TargetPath::validate() const
{
    if (waypoints.size() < 2) throw ValidationError("target.size", "target path needs at least two waypoints");
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const auto& p = waypoints[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("target.finite", "waypoints must be finite");
        if (i > 0 && p.x == waypoints[i - 1].x && p.y == waypoints[i - 1].y) {
            throw ValidationError("target.distinct", fmt::format("waypoints {} and {} coincide", i, i + 1));
        }
    }
}

Backbone predict_path(const PressureSchedule& schedule, const RobotGeometry& geometry,
                      const CalibrationCurve& calibration)
{
    const auto left_groups = schedule.pressures(Side::left);
    const auto right_groups = schedule.pressures(Side::right);
    std::vector<double> left;
    std::vector<double> right;
    for (std::size_t g = 0; g < left_groups.size(); ++g) {
        for (int c = 0; c < geometry.cpams_per_valve; ++c) {
            left.push_back(left_groups[g]);
            right.push_back(right_groups[g]);
        }
    }
    return chain_pose(cell_segments(left, right, 0.0, geometry, calibration), geometry);
}

double point_to_polyline(const Point2& p, std::span<const Point2> polyline)
{
    if (polyline.empty()) return std::numeric_limits<double>::infinity();
    double best = std::hypot(p.x - polyline[0].x, p.y - polyline[0].y);
    for (std::size_t i = 1; i < polyline.size(); ++i) {
        const auto& a = polyline[i - 1];
        const auto& b = polyline[i];
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        best = std::min(best, std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy)));
    }
    return best;
}

std::vector<Point2> polyline_of(const Backbone& backbone)
{
    std::vector<Point2> out;
    if (backbone.samples) {
        for (const auto& s : *backbone.samples) out.push_back({s.x, s.y});
    } else {
        for (const auto& p : backbone.poses) out.push_back({p.x, p.y});
    }
    return out;
}

PathScore score_path(const Backbone& predicted, std::span<const Point2> reference, int points_per_segment)
{
    if (reference.empty()) throw DomainError("score_path: empty reference");
    const Backbone dense = predicted.samples ? predicted : sample_backbone(predicted, points_per_segment);
    PathScore score;
    double sum = 0.0;
    for (const auto& s : *dense.samples) {
        const double d = point_to_polyline({s.x, s.y}, reference);
        sum += d;
        score.max_error = std::max(score.max_error, d);
    }
    score.mean_error = sum / static_cast<double>(dense.samples->size());
    const auto& tip = predicted.tip();
    score.tip_error = std::hypot(tip.x - reference.back().x, tip.y - reference.back().y);
    return score;
}

PathScore score_path(const Backbone& predicted, const Backbone& reference, int points_per_segment)
{
    const Backbone dense = reference.samples ? reference : sample_backbone(reference, points_per_segment);
    return score_path(predicted, polyline_of(dense), points_per_segment);
}

PathScore score_path(const Backbone& predicted, const TargetPath& reference, int points_per_segment)
{
    return score_path(predicted, reference.waypoints, points_per_segment);
}

namespace {

class BendObjective {
public:
    BendObjective(const TargetPath& target, const RobotGeometry& geometry, int points_per_segment)
        : target_(target), geometry_(geometry), pps_(points_per_segment)
    {
    }

    double operator()(std::span<const double> group_bends) const
    {
        if (group_bends.empty()) return 0.0;
        std::vector<Segment> segs;
        const double len = geometry_.l_cpam * geometry_.length_correction;
        for (double q : group_bends) {
            for (int c = 0; c < geometry_.cpams_per_valve; ++c) segs.push_back(make_segment(q, len));
        }
        const Backbone bb = sample_backbone(chain_pose(segs, geometry_), pps_);
        double sum = 0.0;
        for (const auto& s : *bb.samples) {
            const double d = point_to_polyline({s.x, s.y}, target_.waypoints);
            sum += d * d;
        }
        return sum / static_cast<double>(bb.samples->size());
    }

private:
    const TargetPath& target_;
    const RobotGeometry& geometry_;
    int pps_;
};

}  // namespace

PlanResult plan_pressures(const TargetPath& target, const RobotGeometry& geometry, const CalibrationCurve& calibration,
                          int n_groups, const PlanOptions& options)
{
    target.validate();
    geometry.validate();
    if (n_groups < 1) throw DomainError("plan_pressures: need at least one valve group");

    const double max_bend_per_length = calibration.bend_from_pressure(options.p_max);
    const double bound = max_bend_per_length * geometry.l_cpam;
    const BendObjective objective(target, geometry, options.points_per_segment);

    std::vector<double> bends(static_cast<std::size_t>(n_groups), 0.0);
    double f = objective(bends);
    PlanResult result;

    auto clamp_all = [&](std::vector<double> v) {
        for (double& x : v) x = std::clamp(x, -bound, bound);
        return v;
    };
    const int n_grid = std::max(options.grid_points, 3);
    const double grid_step = 2.0 * bound / (n_grid - 1);

    // Minimise along one coordinate, holding the others fixed. Accepts only improvements.
    // The coarse scan runs on the first sweep; later sweeps refine around the current value.
    auto line_search = [&](std::size_t g, bool scan) {
        auto along = [&](double v) {
            auto trial = bends;
            trial[g] = v;
            return objective(trial);
        };
        double best_v = bends[g];
        double best_f = f;
        if (scan) {
            for (int j = 0; j < n_grid; ++j) {
                const double v = -bound + grid_step * j;
                const double fv = along(v);
                if (fv < best_f) {
                    best_f = fv;
                    best_v = v;
                }
            }
        }
        const double lo = std::max(-bound, best_v - grid_step);
        const double hi = std::min(bound, best_v + grid_step);
        const auto [v, fv] = boost::math::tools::brent_find_minima(along, lo, hi, 40);
        if (fv < best_f) {
            best_f = fv;
            best_v = v;
        }
        if (best_f < f) {
            bends[g] = best_v;
            f = best_f;
        }
    };

    // Proximal groups fix where the distal ones start, so fit the chain one group at a time
    // against the target, seeing only the groups placed so far. Kept only if it beats straight.
    auto greedy_seed = [&] {
        std::vector<double> seed;
        for (std::size_t g = 0; g < bends.size(); ++g) {
            auto along = [&](double v) {
                seed.push_back(v);
                const double fv = objective(seed);
                seed.pop_back();
                return fv;
            };
            double best_v = 0.0;
            double best_f = along(0.0);
            for (int j = 0; j < n_grid; ++j) {
                const double v = -bound + grid_step * j;
                const double fv = along(v);
                if (fv < best_f) {
                    best_f = fv;
                    best_v = v;
                }
            }
            const auto [v, fv] = boost::math::tools::brent_find_minima(
                along, std::max(-bound, best_v - grid_step), std::min(bound, best_v + grid_step), 40);
            seed.push_back(fv < best_f ? v : best_v);
        }
        const double fs = objective(seed);
        if (fs < f) {
            bends = std::move(seed);
            f = fs;
        }
    };

    // Extrapolates along the net displacement of the last sweep, projected onto the bounds.
    auto pattern_move = [&](const std::vector<double>& before) {
        std::vector<double> dir(bends.size());
        for (std::size_t g = 0; g < bends.size(); ++g) dir[g] = bends[g] - before[g];
        const auto base = bends;
        auto along = [&](double t) {
            auto trial = base;
            for (std::size_t g = 0; g < trial.size(); ++g) trial[g] += t * dir[g];
            return objective(clamp_all(std::move(trial)));
        };
        const auto [t, ft] = boost::math::tools::brent_find_minima(along, 0.0, 16.0, 40);
        if (ft < f) {
            auto moved = base;
            for (std::size_t g = 0; g < moved.size(); ++g) moved[g] += t * dir[g];
            bends = clamp_all(std::move(moved));
            f = ft;
        }
    };

    if (bound > 0.0) greedy_seed();
    result.objective_history.push_back(f);
    for (int it = 0; it < options.max_iterations && bound > 0.0; ++it) {
        const double f_start = f;
        const auto before = bends;
        for (std::size_t g = 0; g < bends.size(); ++g) line_search(g, it == 0);
        if (it > 0) pattern_move(before);
        result.objective_history.push_back(f);
        result.iterations = it + 1;
        if (std::sqrt(f_start) - std::sqrt(f) < options.objective_tolerance) break;
    }

    // A group pinned at the bound is saturated when going just past it would still
    // improve the RMS fit by more than the convergence tolerance.
    for (std::size_t g = 0; g < bends.size(); ++g) {
        if (bound > 0.0 && std::abs(bends[g]) >= bound * (1.0 - 1e-9)) {
            auto trial = bends;
            trial[g] = std::copysign(bound * (1.0 + 1e-3), bends[g]);
            if (std::sqrt(f) - std::sqrt(objective(trial)) > options.objective_tolerance) result.saturated_groups.push_back(static_cast<int>(g) + 1);
        }
    }

    std::vector<double> left(bends.size(), 0.0);
    std::vector<double> right(bends.size(), 0.0);
    for (std::size_t g = 0; g < bends.size(); ++g) {
        if (bends[g] == 0.0) continue;
        const double per_length = std::min(std::abs(bends[g]) / geometry.l_cpam, max_bend_per_length);
        const double p = std::min(calibration.pressure_from_bend(per_length), options.p_max);
        (bends[g] > 0.0 ? left : right)[g] = p;
    }
    result.schedule = PressureSchedule::from_groups(left, right);
    result.group_bends = bends;
    result.score = score_path(predict_path(result.schedule, geometry, calibration), target, options.points_per_segment);
    return result;
}

TargetPath parse_target_csv(std::istream& in)
{
    TargetPath t;
    for (const auto& row : csv::read_table(in, {"x_mm", "y_mm"})) t.waypoints.push_back({units::mm(row[0]), units::mm(row[1])});
    t.validate();
    return t;
}

TargetPath read_target_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open target path '{}'", path.string()));
    return parse_target_csv(in);
}

void write_target_csv(std::ostream& out, const TargetPath& target)
{
    out << "x_mm,y_mm\n";
    for (const auto& p : target.waypoints) fmt::print(out, "{},{}\n", units::to_mm(p.x), units::to_mm(p.y));
}

void write_score_report(std::ostream& out, const PathScore& score)
{
    fmt::print(out, "mean_error_mm={:.6f}\nmax_error_mm={:.6f}\ntip_error_mm={:.6f}\n", units::to_mm(score.mean_error),
               units::to_mm(score.max_error), units::to_mm(score.tip_error));
}

}  // namespace vinesim
