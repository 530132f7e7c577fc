#include "vinesim/csv.hpp"

#include "vinesim/errors.hpp"

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <istream>

namespace vinesim::csv {

namespace {

Row split(const std::string& line)
{
    Row fields;
    boost::split(fields, line, boost::is_any_of(","));
    for (auto& f : fields) boost::trim(f);
    return fields;
}

}  // namespace

std::vector<Row> read_rows(std::istream& in, const std::vector<std::string>& header)
{
    std::vector<Row> rows;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto trimmed = boost::trim_copy(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        Row fields = split(trimmed);
        if (!have_header) {
            if (fields != header) {
                throw ValidationError("csv.header", fmt::format("line {}: expected header '{}', got '{}'", lineno,
                                                                boost::join(header, ","), trimmed));
            }
            have_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw ValidationError("csv.columns", fmt::format("line {}: expected {} fields, got {}", lineno,
                                                             header.size(), fields.size()));
        }
        rows.push_back(std::move(fields));
    }
    if (!have_header) throw ValidationError("csv.header", "missing header row");
    return rows;
}

std::vector<std::vector<double>> read_table(std::istream& in, const std::vector<std::string>& header)
{
    std::vector<std::vector<double>> out;
    std::size_t n = 0;
    for (const auto& row : read_rows(in, header)) {
        ++n;
        std::vector<double> values;
        values.reserve(row.size());
        for (const auto& f : row) values.push_back(parse_double(f, n));
        out.push_back(std::move(values));
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line)
{
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw ValidationError("csv.number", fmt::format("row {}: '{}' is not a finite number", line, field));
    }
    return v;
}

}  // namespace vinesim::csv
