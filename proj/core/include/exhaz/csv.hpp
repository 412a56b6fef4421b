#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exhaz::csv {

// Plain comma-separated text: no quoting, `#` comment lines and blank lines
// skipped, fields trimmed of surrounding whitespace.
struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

Table read(std::istream& in, std::string source = "<stream>");
Table read_file(const std::filesystem::path& path);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char sep = ',');

double parse_double(std::string_view field, const Table& t, std::size_t row);
long parse_int(std::string_view field, const Table& t, std::size_t row);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace exhaz::csv
