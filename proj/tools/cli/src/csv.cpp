#include "sahnet/cli/csv.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sahnet/error.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::cli {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(Errc::IoFailure, "CSV has no column '" + name + "'");
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      fail(Errc::IoFailure, "CSV line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                                " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (first) fail(Errc::IoFailure, "CSV is empty");
  return t;
}

Table read_csv(const std::filesystem::path& path) {
  const auto bytes = volio::read_file(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()));
}

std::string to_csv(const Table& t) {
  std::string s;
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + f[i];
    s += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  volio::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') fail(Errc::IoFailure, "bad number '" + s + "' for " + what);
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') fail(Errc::IoFailure, "bad integer '" + s + "' for " + what);
  return v;
}

}  // namespace sahnet::cli
