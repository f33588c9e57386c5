#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace varjm::csv {

/// Minimal comma-separated table: header plus rows of raw fields.
/// Quoting is not supported; fields may not contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, or -1.
  int column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

std::vector<std::string> split(std::string_view line);

/// Shortest round-trip representation is not required; 17 significant
/// digits always round-trips an IEEE double.
std::string format_double(double value);

/// Parses a finite or non-finite double; returns false on malformed input.
bool parse_double(std::string_view text, double& out);

}  // namespace varjm::csv
