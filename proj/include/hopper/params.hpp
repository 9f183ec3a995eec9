// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace hopper {

/// Thrown for out-of-domain physical arguments (negative stiffness, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when configuration text cannot be parsed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical constants of the monoped in units normalized by total mass m,
/// natural leg length l0 and gravity g. Defaults reproduce the reference
/// robot exactly.
struct ModelParams {
  double m_f = 0.05;   // foot (lower leg) mass
  double m_l = 0.1;    // upper leg mass
  double m_t = 0.85;   // torso mass
  double theta_f = 0.002;
  double theta_l = 0.002;
  double theta_t = 0.4;
  double r_f = 0.05;   // foot radius
  double d_l = 0.25;   // hip to upper-leg CoM
  double d_f = 0.25;   // foot CoM above foot center
  double k_alpha = 5.0;
  double xi_l = 0.2 * std::sqrt(2.0);
  double xi_alpha = 0.2;
  double l0 = 1.0;     // natural leg length, spring slack
  double g = 1.0;

  double total_mass() const { return m_f + m_l + m_t; }

  /// Throws DomainError unless masses, inertias and lengths are positive and
  /// damping ratios non-negative.
  void validate() const;

  /// Key-value view (`name -> value`) used for files and hashing.
  std::map<std::string, double> to_map() const;

  /// Overrides fields from `key = value` lines; `#` starts a comment.
  /// Unknown keys raise ConfigError.
  static ModelParams parse(const std::string& text);
  static ModelParams load(const std::filesystem::path& path);
  std::string to_text() const;
};

}  // namespace hopper
