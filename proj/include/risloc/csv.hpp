// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace risloc::csv {

// Every file starts with "# <schema> v<version>" followed by the column header.
class Writer {
 public:
  Writer(const std::string& path, const std::string& schema, int version, const std::vector<std::string>& columns);
  Writer& operator<<(double v);
  Writer& operator<<(long long v);
  Writer& operator<<(int v) { return *this << static_cast<long long>(v); }
  Writer& operator<<(const std::string& v);
  void end_row();

 private:
  void sep();
  std::ofstream out_;
  bool first_ = true;
};

struct Table {
  std::string schema;
  int version = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;
  double number(size_t row, const std::string& name) const;
};

Table read(const std::string& path);
std::string format_double(double v);

}  // namespace risloc::csv
