#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sahnet::cli {

/// Headered, comma-separated table. Quoting is not supported; fields may
/// not contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index, throws Error(IoFailure) when missing.
  std::size_t column(const std::string& name) const;
};

Table parse_csv(const std::string& text);
Table read_csv(const std::filesystem::path& path);
std::string to_csv(const Table& t);
void write_text(const std::filesystem::path& path, const std::string& text);

double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

}  // namespace sahnet::cli
