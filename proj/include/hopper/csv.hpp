// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Numeric CSV tables with 12 significant digits. Values are rounded on
// insertion, so writing and re-reading a table reproduces it exactly.

#include <iosfwd>
#include <string>
#include <vector>

namespace hopper {

/// Nearest double to `x` printed with 12 significant digits.
double round12(double x);
std::string format12(double x);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Appends a row, rounding every value; the width must match `columns`.
  void add(const std::vector<double>& row);
  bool empty() const { return rows.empty(); }
  void write(std::ostream& os) const;
  std::string to_string() const;
  /// Throws ConfigError on malformed text.
  static CsvTable parse(const std::string& text);
};

}  // namespace hopper
