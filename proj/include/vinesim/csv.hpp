#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// Minimal reader for the small comma-separated tables used at the I/O boundary.
// Blank lines and lines starting with '#' are skipped. The first remaining line must
// match the expected header exactly.
namespace vinesim::csv {

using Row = std::vector<std::string>;

std::vector<Row> read_rows(std::istream& in, const std::vector<std::string>& header);
std::vector<std::vector<double>> read_table(std::istream& in, const std::vector<std::string>& header);

double parse_double(std::string_view field, std::size_t line);

}  // namespace vinesim::csv
