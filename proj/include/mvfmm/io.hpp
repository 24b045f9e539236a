#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mvfmm::io {

/// A parsed comma-separated file: header plus data rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index or -1.
  int column(std::string_view name) const;
};

/// Reads a UTF-8 CSV with a header row. Fields may be double-quoted.
/// Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

double parse_double(std::string_view text);
int parse_int(std::string_view text);

/// Shortest representation that round-trips to the same double.
std::string format_double(double value);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace mvfmm::io
