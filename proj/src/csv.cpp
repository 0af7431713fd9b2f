// SPDX-License-Identifier: Apache-2.0
#include "risloc/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace risloc::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

Writer::Writer(const std::string& path, const std::string& schema, int version,
               const std::vector<std::string>& columns)
    : out_(path) {
  if (!out_) throw std::runtime_error("cannot write " + path);
  out_ << "# " << schema << " v" << version << '\n';
  for (size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void Writer::sep() {
  if (!first_) out_ << ',';
  first_ = false;
}

Writer& Writer::operator<<(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

Writer& Writer::operator<<(long long v) {
  sep();
  out_ << v;
  return *this;
}

Writer& Writer::operator<<(const std::string& v) {
  sep();
  out_ << v;
  return *this;
}

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.schema.empty()) {
        std::istringstream ss(line.substr(1));
        std::string ver;
        ss >> t.schema >> ver;
        if (ver.size() > 1 && ver[0] == 'v') t.version = std::stoi(ver.substr(1));
      }
      continue;
    }
    if (!have_header) {
      t.columns = split(line);
      have_header = true;
      continue;
    }
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.columns.size())
      throw std::runtime_error(path + ": row " + std::to_string(t.rows.size()) + " has wrong column count");
  }
  if (!have_header) throw std::runtime_error(path + ": missing header");
  return t;
}

int Table::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw std::runtime_error("missing column: " + name);
}

double Table::number(size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  if (s.empty() || s == "nan") return std::nan("");
  return std::stod(s);
}

}  // namespace risloc::csv
