#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rlhflab {

/// A header row plus string cells, written as comma-separated text with LF
/// line endings.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

/// Shortest-round-trip-safe decimal text of a double (17 significant digits).
std::string format_double(double value);
std::string format_count(std::size_t value);

std::string to_csv(const Table& table);
/// Parses CSV text with an optional quoted-field syntax. Throws
/// std::runtime_error on ragged rows.
Table parse_csv(const std::string& text);

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_csv(const std::filesystem::path& path, const Table& table);
Table read_csv(const std::filesystem::path& path);

}  // namespace rlhflab
