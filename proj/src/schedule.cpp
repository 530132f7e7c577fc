#include "vinesim/schedule.hpp"

#include "vinesim/csv.hpp"
#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

namespace vinesim {

PressureSchedule PressureSchedule::from_groups(std::span<const double> left, std::span<const double> right)
{
    PressureSchedule s;
    const auto n = std::max(left.size(), right.size());
    for (std::size_t g = 0; g < n; ++g) {
        const int id = static_cast<int>(g) + 1;
        s.entries.push_back({id, Side::left, g < left.size() ? left[g] : 0.0});
        s.entries.push_back({id, Side::right, g < right.size() ? right[g] : 0.0});
    }
    return s;
}

int PressureSchedule::group_count() const
{
    int n = 0;
    for (const auto& e : entries) n = std::max(n, e.group);
    return n;
}

std::vector<double> PressureSchedule::pressures(Side side) const
{
    std::vector<double> out(static_cast<std::size_t>(group_count()), 0.0);
    for (const auto& e : entries) {
        if (e.side == side && e.group >= 1) out[static_cast<std::size_t>(e.group - 1)] = e.pressure;
    }
    return out;
}

void PressureSchedule::validate(double p_max) const
{
    std::set<std::pair<int, Side>> seen;
    for (const auto& e : entries) {
        if (e.group < 1) throw ValidationError("schedule.group_id", fmt::format("group id {} must be >= 1", e.group));
        if (!(e.pressure >= 0.0 && e.pressure <= p_max)) {
            throw ValidationError("schedule.pressure_range",
                                  fmt::format("group {} {}: {} kPa outside [0, {}] kPa", e.group, to_string(e.side),
                                              units::to_kpa(e.pressure), units::to_kpa(p_max)));
        }
        if (!seen.insert({e.group, e.side}).second) {
            throw ValidationError("schedule.duplicate",
                                  fmt::format("group {} {} listed twice", e.group, to_string(e.side)));
        }
    }
    std::set<int> groups;
    for (const auto& [g, _] : seen) groups.insert(g);
    const int n = group_count();
    if (static_cast<int>(groups.size()) != n) {
        throw ValidationError("schedule.complete", fmt::format("every group 1..{} needs at least one entry", n));
    }
}

PressureSchedule parse_schedule_csv(std::istream& in)
{
    PressureSchedule s;
    std::size_t n = 0;
    for (const auto& row : csv::read_rows(in, {"group_id", "side", "pressure_kpa"})) {
        ++n;
        const double id = csv::parse_double(row[0], n);
        if (id != std::floor(id)) throw ValidationError("schedule.group_id", fmt::format("row {}: group id must be an integer", n));
        s.entries.push_back({static_cast<int>(id), side_from_string(row[1]), units::kpa(csv::parse_double(row[2], n))});
    }
    return s;
}

PressureSchedule read_schedule_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open schedule '{}'", path.string()));
    return parse_schedule_csv(in);
}

void write_schedule_csv(std::ostream& out, const PressureSchedule& schedule)
{
    out << "group_id,side,pressure_kpa\n";
    for (const auto& e : schedule.entries) {
        fmt::print(out, "{},{},{:.6f}\n", e.group, to_string(e.side), units::to_kpa(e.pressure));
    }
}

}  // namespace vinesim
