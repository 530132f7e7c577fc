#include "vinesim/pneumatics.hpp"

#include "vinesim/csv.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vinesim {

using units::kPi;

void ValveParams::validate() const
{
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(k_spring) || !positive(d_ball) || !positive(f_magnet) || !std::isfinite(x0) ||
        x0 < 0.0 || !std::isfinite(p_max) || p_max < 0.0) {
        throw ValidationError("valve.positive", "valve constants must be positive and finite");
    }
    if (!std::isfinite(p_vacuum) || p_vacuum > 0.0) {
        throw ValidationError("valve.vacuum_floor", "vacuum floor must be <= 0 Pa gauge");
    }
    if (k_spring * x0 < cpam_max_force(*this)) {
        throw ValidationError(
            "valve.closes_without_magnet",
            fmt::format("spring preload {:.4f} N is below the pouch-side force {:.4f} N",
                        k_spring * x0, cpam_max_force(*this)));
    }
    if (f_magnet < required_magnet_force(*this)) {
        throw ValidationError(
            "valve.opens_with_magnet",
            fmt::format("magnet force {:.4f} N is below the required {:.4f} N", f_magnet,
                        required_magnet_force(*this)));
    }
}

double cpam_max_force(const ValveParams& params)
{
    const double r = params.d_ball / 2.0;
    return 0.5 * 4.0 * kPi * r * r * params.p_max;
}

double required_pretension(const ValveParams& params)
{
    if (!(params.k_spring > 0.0)) throw DomainError("required_pretension: spring stiffness must be positive");
    return cpam_max_force(params) / params.k_spring;
}

double required_magnet_force(const ValveParams& params)
{
    // Spring preload at its minimum plus the full supply-side force.
    return kPi * params.d_ball * params.d_ball * params.p_max;
}

ValveState valve_step(const ValveState& state, bool magnet_present, double p_supply,
                      const ValveParams& params)
{
    if (!(p_supply >= params.p_vacuum && p_supply <= params.p_max)) {
        throw CommandRejected(fmt::format("supply pressure {:.3f} kPa outside [{:.3f}, {:.3f}] kPa",
                                          units::to_kpa(p_supply), units::to_kpa(params.p_vacuum),
                                          units::to_kpa(params.p_max)));
    }
    if (magnet_present) return {true, p_supply};
    return {false, state.held_pressure};
}

CalibrationCurve::CalibrationCurve()
    : CalibrationCurve({{0.0, 0.0}, {units::kpa(40.0), units::deg_per_mm(0.185)}})
{
}

CalibrationCurve::CalibrationCurve(std::vector<CalibrationPoint> points) : points_(std::move(points))
{
    if (points_.size() < 2) throw ValidationError("calibration.size", "calibration needs at least two points");
    if (points_.front().pressure != 0.0 || points_.front().bend_per_length != 0.0) {
        throw ValidationError("calibration.origin", "calibration must start at (0 kPa, 0 deg/mm)");
    }
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        if (!std::isfinite(b.pressure) || !std::isfinite(b.bend_per_length)) {
            throw ValidationError("calibration.finite", "calibration values must be finite");
        }
        if (!(b.pressure > a.pressure)) {
            throw ValidationError("calibration.pressure_increasing",
                                  fmt::format("pressures must be strictly increasing (row {})", i + 1));
        }
        if (b.bend_per_length < a.bend_per_length) {
            throw ValidationError("calibration.monotone",
                                  fmt::format("bend must be non-decreasing in pressure (row {})", i + 1));
        }
    }
}

double CalibrationCurve::bend_from_pressure(double pressure) const
{
    if (!(pressure > 0.0)) return 0.0;
    if (pressure >= max_pressure()) return max_bend();
    auto hi = std::upper_bound(points_.begin(), points_.end(), pressure,
                               [](double p, const CalibrationPoint& pt) { return p < pt.pressure; });
    auto lo = hi - 1;
    const double t = (pressure - lo->pressure) / (hi->pressure - lo->pressure);
    return lo->bend_per_length + t * (hi->bend_per_length - lo->bend_per_length);
}

double CalibrationCurve::pressure_from_bend(double bend) const
{
    if (!(bend >= 0.0)) throw DomainError("pressure_from_bend: bend must be non-negative");
    if (bend > max_bend()) {
        throw InfeasibleBend(fmt::format("bend {:.5f} deg/mm exceeds the calibrated maximum {:.5f} deg/mm",
                                         units::to_deg_per_mm(bend), units::to_deg_per_mm(max_bend())));
    }
    auto hi = std::lower_bound(points_.begin(), points_.end(), bend,
                               [](const CalibrationPoint& pt, double b) { return pt.bend_per_length < b; });
    if (hi == points_.begin() || hi->bend_per_length == bend) return hi->pressure;
    auto lo = hi - 1;
    const double t = (bend - lo->bend_per_length) / (hi->bend_per_length - lo->bend_per_length);
    return lo->pressure + t * (hi->pressure - lo->pressure);
}

CalibrationCurve parse_calibration_csv(std::istream& in)
{
    const auto table = csv::read_table(in, {"pressure_kpa", "bend_deg_per_mm"});
    std::vector<CalibrationPoint> pts;
    pts.reserve(table.size());
    for (const auto& row : table) {
        pts.push_back({units::kpa(row[0]), units::deg_per_mm(row[1])});
    }
    return CalibrationCurve(std::move(pts));
}

CalibrationCurve read_calibration_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open calibration table '{}'", path.string()));
    return parse_calibration_csv(in);
}

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve)
{
    out << "pressure_kpa,bend_deg_per_mm\n";
    for (const auto& p : curve.points()) {
        fmt::print(out, "{},{}\n", units::to_kpa(p.pressure), units::to_deg_per_mm(p.bend_per_length));
    }
}

void write_calibration_csv_si(std::ostream& out, const CalibrationCurve& curve)
{
    out << "pressure_pa,bend_rad_per_m\n";
    for (const auto& p : curve.points()) fmt::print(out, "{},{}\n", p.pressure, p.bend_per_length);
}

}  // namespace vinesim
