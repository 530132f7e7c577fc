#pragma once

#include <numbers>

// SI is used everywhere inside the library. These helpers are for I/O boundaries only.
namespace vinesim::units {

inline constexpr double kPi = std::numbers::pi;

constexpr double mm(double v) { return v * 1e-3; }
constexpr double to_mm(double m) { return m * 1e3; }

constexpr double kpa(double v) { return v * 1e3; }
constexpr double to_kpa(double pa) { return pa * 1e-3; }

constexpr double deg(double v) { return v * kPi / 180.0; }
constexpr double to_deg(double rad) { return rad * 180.0 / kPi; }

// deg/mm <-> rad/m
constexpr double deg_per_mm(double v) { return deg(v) * 1e3; }
constexpr double to_deg_per_mm(double rad_per_m) { return to_deg(rad_per_m) * 1e-3; }

constexpr double n_per_mm(double v) { return v * 1e3; }

}  // namespace vinesim::units
