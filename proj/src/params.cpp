// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/params.hpp"

#include <fstream>
#include <sstream>

#include "hopper/keyvalue.hpp"

namespace hopper {

namespace {

using Field = double ModelParams::*;

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = {
      {"m_f", &ModelParams::m_f},         {"m_l", &ModelParams::m_l},
      {"m_t", &ModelParams::m_t},         {"theta_f", &ModelParams::theta_f},
      {"theta_l", &ModelParams::theta_l}, {"theta_t", &ModelParams::theta_t},
      {"r_f", &ModelParams::r_f},         {"d_l", &ModelParams::d_l},
      {"d_f", &ModelParams::d_f},         {"k_alpha", &ModelParams::k_alpha},
      {"xi_l", &ModelParams::xi_l},       {"xi_alpha", &ModelParams::xi_alpha},
      {"l0", &ModelParams::l0},           {"g", &ModelParams::g},
  };
  return table;
}

}  // namespace

void ModelParams::validate() const {
  for (const auto& [name, field] : field_table()) {
    const double value = this->*field;
    if (!std::isfinite(value)) throw DomainError("model parameter " + name + " is not finite");
    const bool may_be_zero = name == "xi_l" || name == "xi_alpha" || name == "k_alpha";
    if (may_be_zero ? value < 0.0 : value <= 0.0) {
      throw DomainError("model parameter " + name + " out of range: " + std::to_string(value));
    }
  }
}

std::map<std::string, double> ModelParams::to_map() const {
  std::map<std::string, double> out;
  for (const auto& [name, field] : field_table()) out[name] = this->*field;
  return out;
}

ModelParams ModelParams::parse(const std::string& text) {
  ModelParams p;
  const auto& table = field_table();
  for (const auto& [key, value] : parse_key_values(text)) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown model parameter '" + key + "'");
    p.*(it->second) = parse_double(key, value);
  }
  p.validate();
  return p;
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

std::string ModelParams::to_text() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& [name, value] : to_map()) os << name << " = " << value << "\n";
  return os.str();
}

}  // namespace hopper
