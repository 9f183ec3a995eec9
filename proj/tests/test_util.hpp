// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "hopper/model.hpp"
#include "hopper/transcription.hpp"

namespace hopper::testing {

inline State random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  State x;
  x.q << 0.5 * unit(rng), 1.0 + 0.3 * unit(rng), 0.4 * unit(rng), 0.5 * unit(rng), 0.85 + 0.2 * unit(rng);
  for (int i = 0; i < 5; ++i) x.qdot[i] = unit(rng);
  return x;
}

inline ControlInput random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  return {unit(rng), 2.0 * unit(rng)};
}

/// Central finite-difference Jacobian of f: R^n -> R^m.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// max |A - B| / max(1, max |B|)
inline double rel_err(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A - B).cwiseAbs().maxCoeff() / std::max(1.0, B.cwiseAbs().maxCoeff());
}

/// Classic fixed-step RK4, independent of the library integrator.
inline Eigen::VectorXd rk4(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                           double dt, int steps) {
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

/// Random stride decision vector with plausible magnitudes.
inline nlp::Vector random_decision(const StrideLayout& layout, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  nlp::Vector a(layout.size());
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    for (int j = 0; j < layout.nodes_per_phase(); ++j) {
      const int o = layout.offset(ph, j);
      a[o + 0] = 0.5 * unit(rng);
      a[o + 1] = 1.0 + 0.2 * unit(rng);
      a[o + 2] = 0.3 * unit(rng);
      a[o + 3] = 0.4 * unit(rng);
      a[o + 4] = 0.85 + 0.1 * unit(rng);
      for (int i = 5; i < 10; ++i) a[o + i] = unit(rng);
      a[o + node::kU] = unit(rng);
      a[o + node::kU + 1] = 2.0 * unit(rng);
      a[o + node::kDt] = 0.1 + 0.03 * unit(rng);
      a[o + node::kK] = 4.0 + unit(rng);
      a[o + node::kV] = unit(rng);
      a[o + node::kV + 1] = unit(rng);
    }
  }
  return a;
}

}  // namespace hopper::testing
