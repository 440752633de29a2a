#include "degp/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace degp::io {

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(trim(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged csv row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty csv file: " + path);
  return rows;
}

nd::Tensor read_numeric_csv(const std::string& path) {
  auto rows = read_csv(path);
  std::size_t start = 0;
  auto numeric = [](const std::string& s) {
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end != s.c_str() && *end == '\0';
  };
  if (!numeric(rows[0][0])) start = 1;  // header row
  if (rows.size() <= start)
    throw std::runtime_error("csv has no data rows: " + path);
  const std::size_t r = rows.size() - start;
  const std::size_t c = rows[0].size();
  nd::Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const std::string& cell = rows[i + start][j];
      if (!numeric(cell))
        throw std::runtime_error("non-numeric cell '" + cell + "' in " + path);
      out(i, j) = std::strtod(cell.c_str(), nullptr);
    }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

}  // namespace degp::io
