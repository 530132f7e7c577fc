#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace vinesim {

// Physical constants of one spring-loaded magnetic ball valve. SI, gauge pressures.
struct ValveParams {
    double k_spring = 928.0;     // N/m (0.928 N/mm)
    double x0 = 0.424e-3;        // spring pretension displacement
    double d_ball = 2.5e-3;
    double p_max = 40e3;
    double f_magnet = 1.0;       // tip-mount magnet pull at the valve; only a lower bound is known
    double p_vacuum = -20e3;     // lowest supply pressure the line accepts

    static ValveParams prototype() { return {}; }

    // Checks positivity and both design inequalities (closed without magnet, open with it).
    void validate() const;
};

// Largest pressure force on the ball from the pouch side.
double cpam_max_force(const ValveParams& params);
double required_pretension(const ValveParams& params);
double required_magnet_force(const ValveParams& params);

struct ValveState {
    bool is_open = false;
    double held_pressure = 0.0;  // pouch-side pressure, Pa gauge

    friend bool operator==(const ValveState&, const ValveState&) = default;
};

// Quasi-static valve update. With the magnet present the pouch equalizes with the supply
// line; otherwise the valve closes and traps whatever pressure the pouch holds.
// Throws CommandRejected (no state change) when the supply is outside [p_vacuum, p_max].
ValveState valve_step(const ValveState& state, bool magnet_present, double p_supply,
                      const ValveParams& params);

struct CalibrationPoint {
    double pressure = 0.0;         // Pa gauge
    double bend_per_length = 0.0;  // rad/m
};

// Monotone piecewise-linear map from pouch pressure to bend per unit length.
class CalibrationCurve {
public:
    // Two-point curve through the origin and the measured maximum (0.185 deg/mm at 40 kPa).
    CalibrationCurve();
    explicit CalibrationCurve(std::vector<CalibrationPoint> points);

    const std::vector<CalibrationPoint>& points() const { return points_; }
    double max_pressure() const { return points_.back().pressure; }
    double max_bend() const { return points_.back().bend_per_length; }

    // Negative pressures give zero bend, pressures above the table saturate.
    double bend_from_pressure(double pressure) const;
    // Smallest pressure producing `bend`. Throws InfeasibleBend above max_bend().
    double pressure_from_bend(double bend) const;

private:
    std::vector<CalibrationPoint> points_;
};

// `pressure_kpa,bend_deg_per_mm` with a header row; converted to SI.
CalibrationCurve parse_calibration_csv(std::istream& in);
CalibrationCurve read_calibration_csv(const std::filesystem::path& path);
void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve);
// Normalized SI table: `pressure_pa,bend_rad_per_m`.
void write_calibration_csv_si(std::ostream& out, const CalibrationCurve& curve);

}  // namespace vinesim
