// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/csv.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "hopper/params.hpp"

namespace hopper {

std::string format12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double round12(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(format12(x).c_str(), nullptr);
}

void CsvTable::add(const std::vector<double>& row) {
  if (row.size() != columns.size()) throw ConfigError("csv row width does not match the header");
  std::vector<double> r(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) r[i] = round12(row[i]);
  rows.push_back(std::move(r));
}

void CsvTable::write(std::ostream& os) const {
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format12(r[i]);
    os << '\n';
  }
}

std::string CsvTable::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(is, line)) throw ConfigError("csv: missing header");
  t.columns = split(line);
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) throw ConfigError("csv line " + std::to_string(lineno) + ": wrong width");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0') throw ConfigError("csv line " + std::to_string(lineno) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace hopper
