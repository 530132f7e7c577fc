#pragma once

#include "vinesim/kinematics.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace vinesim {

struct ScheduleEntry {
    int group = 1;  // 1-based, as in files and messages
    Side side = Side::left;
    double pressure = 0.0;  // Pa gauge
};

// Supply pressure per valve group and side, applied at full eversion.
struct PressureSchedule {
    std::vector<ScheduleEntry> entries;

    static PressureSchedule from_groups(std::span<const double> left, std::span<const double> right);

    int group_count() const;
    // Pressure per group (index 0 = group 1). Missing entries read as zero.
    std::vector<double> pressures(Side side) const;
    // Groups 1..group_count() each listed at least once, no side twice, pressures in [0, p_max]. An unlisted side is 0.
    void validate(double p_max) const;
};

// `group_id,side,pressure_kpa`
PressureSchedule parse_schedule_csv(std::istream& in);
PressureSchedule read_schedule_csv(const std::filesystem::path& path);
void write_schedule_csv(std::ostream& out, const PressureSchedule& schedule);

}  // namespace vinesim
