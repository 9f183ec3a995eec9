// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Node-local dynamics with first and second derivatives for the
// transcription. The acceleration and contact force of a node depend only on
//   z = [phi, alpha, l, xdot, ydot, phidot, alphadot, ldot, tau, f, k_l]
// (the horizontal and vertical hip position never enter the dynamics).

#include <array>
#include <limits>

#include "hopper/dual.hpp"
#include "hopper/model.hpp"
#include "hopper/model_kernels.hpp"
#include "hopper/transcription.hpp"

namespace hopper::detail {

inline constexpr int kZ = 11;
/// Node-vector column of each z entry.
inline constexpr std::array<int, kZ> kZColumns = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, node::kK};

struct NodeValue {
  std::array<double, 5> qdd{};
  double lambda_y = 0.0;
};

struct NodeDerivative : NodeValue {
  // d(qdd_r)/dz (rows 0..4) and d(lambda_y)/dz (row 5).
  std::array<std::array<double, kZ>, 6> jac{};
};

template <typename T>
void node_accel(Phase phase, const std::array<T, kZ>& z, const ModelParams& p, kernels::Vec5T<T>& qdd, T& lambda_y) {
  const kernels::Vec5T<T> q{T(0.0), T(0.0), z[0], z[1], z[2]};
  const kernels::Vec5T<T> qd{z[3], z[4], z[5], z[6], z[7]};
  const std::array<T, 2> u{z[8], z[9]};
  bool ok = false;
  if (phase == Phase::kStance) {
    std::array<T, 2> lambda;
    ok = kernels::stance_accel(q, qd, u, z[10], p, qdd, lambda);
    lambda_y = lambda[1];
  } else {
    ok = kernels::flight_accel(q, qd, u, z[10], p, qdd);
    lambda_y = T(0.0);
  }
  if (!ok) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto& v : qdd) v = T(nan);
    lambda_y = T(nan);
  }
}

inline std::array<double, kZ> gather_z(const double* node_ptr) {
  std::array<double, kZ> z;
  for (int i = 0; i < kZ; ++i) z[i] = node_ptr[kZColumns[i]];
  return z;
}

inline NodeValue eval_node(Phase phase, const double* node_ptr, const ModelParams& p) {
  NodeValue out;
  kernels::Vec5T<double> qdd;
  node_accel(phase, gather_z(node_ptr), p, qdd, out.lambda_y);
  out.qdd = qdd;
  return out;
}

inline NodeDerivative eval_node_derivative(Phase phase, const double* node_ptr, const ModelParams& p) {
  using D = ad::Dual<double, kZ>;
  const auto z = gather_z(node_ptr);
  std::array<D, kZ> zd;
  for (int i = 0; i < kZ; ++i) zd[i] = ad::variable<kZ>(z[i], i);
  kernels::Vec5T<D> qdd;
  D lambda_y;
  node_accel(phase, zd, p, qdd, lambda_y);
  NodeDerivative out;
  for (int r = 0; r < 5; ++r) {
    out.qdd[r] = qdd[r].v;
    out.jac[r] = qdd[r].d;
  }
  out.lambda_y = lambda_y.v;
  out.jac[5] = lambda_y.d;
  return out;
}

/// Hessian of  sum_r w_r qdd_r + mu lambda_y  with respect to z.
inline std::array<std::array<double, kZ>, kZ> node_weighted_hessian(Phase phase, const double* node_ptr,
                                                                    const std::array<double, 5>& w, double mu,
                                                                    const ModelParams& p) {
  using D2 = ad::Dual<ad::Dual<double, kZ>, kZ>;
  const auto z = gather_z(node_ptr);
  std::array<D2, kZ> zd;
  for (int i = 0; i < kZ; ++i) zd[i] = ad::variable2<kZ>(z[i], i);
  kernels::Vec5T<D2> qdd;
  D2 lambda_y;
  node_accel(phase, zd, p, qdd, lambda_y);
  D2 acc = mu * lambda_y;
  for (int r = 0; r < 5; ++r) acc += w[r] * qdd[r];
  std::array<std::array<double, kZ>, kZ> H;
  for (int i = 0; i < kZ; ++i)
    for (int j = 0; j < kZ; ++j) H[i][j] = acc.d[i].d[j];
  return H;
}

// Impact map seen as a function of u = [phi, alpha, l, qdot^-(5)].
inline constexpr int kImpactZ = 8;

template <typename T>
kernels::Vec5T<T> impact_velocity(const std::array<T, kImpactZ>& z, const ModelParams& p) {
  const kernels::Vec5T<T> q{T(0.0), T(0.0), z[0], z[1], z[2]};
  const kernels::Vec5T<T> qd{z[3], z[4], z[5], z[6], z[7]};
  kernels::Vec5T<T> plus;
  std::array<T, 2> impulse;
  if (!kernels::impact(q, qd, p, plus, impulse)) {
    for (auto& v : plus) v = T(std::numeric_limits<double>::quiet_NaN());
  }
  return plus;
}

}  // namespace hopper::detail
