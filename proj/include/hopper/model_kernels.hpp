// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scalar-generic equations of motion. Every function is a template over the
// scalar so the same code evaluates in double and in (nested) dual numbers.
//
// Coordinates q = [x, y, phi, alpha, l]. The hip sits at (x, y) and carries
// the torso CoM. The leg points along theta = phi + alpha measured from the
// downward vertical; the upper-leg CoM is d_l from the hip, the foot center
// is l from the hip and the foot CoM is l - d_f from the hip.

#include <array>
#include <cmath>

#include "hopper/dual.hpp"
#include "hopper/params.hpp"

namespace hopper::kernels {

inline constexpr int kNq = 5;

template <typename T>
using Vec5T = std::array<T, kNq>;
template <typename T>
using Mat5T = std::array<std::array<T, kNq>, kNq>;

using ad::value_of;

inline double hip_damping(const ModelParams& p) {
  const double lever = p.l0 + p.d_f;
  return 2.0 * p.xi_alpha *
         std::sqrt(p.k_alpha * (p.theta_l + p.m_l * p.d_l * p.d_l + p.theta_f + p.m_f * lever * lever));
}

template <typename T>
T leg_damping(const T& k_l, const ModelParams& p) {
  using std::sqrt;
  return 2.0 * p.xi_l * sqrt(k_l * (p.m_t + p.m_l));
}

/// Translational CoM Jacobian rows of the upper leg and foot together with
/// their velocity-product accelerations Jdot * qdot.
template <typename T>
struct LegKinematics {
  T s, c;          // sin/cos of theta
  T lf;            // hip to foot CoM
  T theta_dot;
  // Jacobian entries: upper leg rows only depend on theta; foot adds l column.
  std::array<T, 2> upper_jdot_qdot;
  std::array<T, 2> foot_jdot_qdot;
};

template <typename T>
LegKinematics<T> leg_kinematics(const Vec5T<T>& q, const Vec5T<T>& qd, const ModelParams& p) {
  using std::cos;
  using std::sin;
  LegKinematics<T> k;
  const T theta = q[2] + q[3];
  k.s = sin(theta);
  k.c = cos(theta);
  k.lf = q[4] - p.d_f;
  k.theta_dot = qd[2] + qd[3];
  const T td2 = k.theta_dot * k.theta_dot;
  k.upper_jdot_qdot = {-p.d_l * k.s * td2, p.d_l * k.c * td2};
  const T cross = 2.0 * k.theta_dot * qd[4];
  k.foot_jdot_qdot = {cross * k.c - k.lf * k.s * td2, cross * k.s + k.lf * k.c * td2};
  return k;
}

template <typename T>
Mat5T<T> mass_matrix(const Vec5T<T>& q, const ModelParams& p) {
  using std::cos;
  using std::sin;
  const T theta = q[2] + q[3];
  const T s = sin(theta);
  const T c = cos(theta);
  const T lf = q[4] - p.d_f;
  const double m = p.total_mass();
  const double leg_inertia = p.theta_l + p.theta_f;

  // J rows (x, y) for upper leg: [1 0 d_l c d_l c 0], [0 1 d_l s d_l s 0]
  // foot: [1 0 lf c lf c s], [0 1 lf s lf s -c]
  const T a_x = p.m_l * p.d_l * c + p.m_f * lf * c;  // sum m_i * dpx_i/dtheta
  const T a_y = p.m_l * p.d_l * s + p.m_f * lf * s;
  const T rot = p.m_l * p.d_l * p.d_l + p.m_f * lf * lf + leg_inertia;

  Mat5T<T> M{};
  M[0][0] = T(m);
  M[1][1] = T(m);
  M[0][2] = M[0][3] = a_x;
  M[1][2] = M[1][3] = a_y;
  M[0][4] = p.m_f * s;
  M[1][4] = -p.m_f * c;
  M[2][2] = rot + p.theta_t;
  M[2][3] = rot;
  M[3][3] = rot;
  // foot: dpx/dtheta * dpx/dl + dpy/dtheta * dpy/dl = lf c s - lf s c = 0
  M[2][4] = T(0.0);
  M[3][4] = T(0.0);
  M[4][4] = T(p.m_f);
  for (int i = 0; i < kNq; ++i)
    for (int j = 0; j < i; ++j) M[i][j] = M[j][i];
  return M;
}

/// Generalized bias forces: velocity-product terms, gravity, springs and
/// dampers. Spring/damper laws: leg k_l (l0 - l) - b_l ldot, hip
/// -k_alpha alpha - b_alpha alphadot.
template <typename T>
Vec5T<T> bias_forces(const Vec5T<T>& q, const Vec5T<T>& qd, const T& k_l, const ModelParams& p) {
  const auto kin = leg_kinematics(q, qd, p);
  const T& s = kin.s;
  const T& c = kin.c;
  const auto& au = kin.upper_jdot_qdot;
  const auto& af = kin.foot_jdot_qdot;

  Vec5T<T> h{};
  // -sum m_i J_i^T (Jdot_i qdot)
  h[0] = -(p.m_l * au[0] + p.m_f * af[0]);
  h[1] = -(p.m_l * au[1] + p.m_f * af[1]);
  const T dtheta = -(p.m_l * p.d_l * (c * au[0] + s * au[1]) + p.m_f * kin.lf * (c * af[0] + s * af[1]));
  h[2] = dtheta;
  h[3] = dtheta;
  h[4] = -p.m_f * (s * af[0] - c * af[1]);

  // gravity: -dV/dq with V = g sum m_i y_i
  const double m = p.total_mass();
  h[1] = h[1] - m * p.g;
  const T grav_theta = -p.g * (p.m_l * p.d_l * s + p.m_f * kin.lf * s);
  h[2] = h[2] + grav_theta;
  h[3] = h[3] + grav_theta;
  h[4] = h[4] + p.m_f * p.g * c;

  const T b_l = leg_damping(k_l, p);
  const double b_alpha = hip_damping(p);
  h[3] = h[3] - p.k_alpha * q[3] - b_alpha * qd[3];
  h[4] = h[4] + k_l * (p.l0 - q[4]) - b_l * qd[4];
  return h;
}

/// Contact Jacobian W = dc/dq (2x5) for the rolling foot.
template <typename T>
std::array<Vec5T<T>, 2> contact_jacobian(const Vec5T<T>& q, const ModelParams& p) {
  using std::cos;
  using std::sin;
  const T theta = q[2] + q[3];
  const T s = sin(theta);
  const T c = cos(theta);
  const T ang_x = p.r_f + q[4] * c;
  const T ang_y = q[4] * s;
  return {Vec5T<T>{T(1.0), T(0.0), ang_x, ang_x, s}, Vec5T<T>{T(0.0), T(1.0), ang_y, ang_y, -c}};
}

/// Drift term Wdot(q, qdot) * qdot of the twice differentiated constraint.
template <typename T>
std::array<T, 2> contact_drift(const Vec5T<T>& q, const Vec5T<T>& qd) {
  using std::cos;
  using std::sin;
  const T theta = q[2] + q[3];
  const T s = sin(theta);
  const T c = cos(theta);
  const T td = qd[2] + qd[3];
  const T cross = 2.0 * td * qd[4];
  return {cross * c - q[4] * s * td * td, cross * s + q[4] * c * td * td};
}

template <typename T>
T touchdown_height(const Vec5T<T>& q, const ModelParams& p) {
  using std::cos;
  return q[1] - q[4] * cos(q[2] + q[3]) - p.r_f;
}

/// Gaussian elimination with partial pivoting on the innermost value.
/// Returns false when a pivot is numerically zero.
template <typename T, std::size_t N>
bool solve_in_place(std::array<std::array<T, N>, N>& A, std::array<T, N>& b, double pivot_tol = 1e-13) {
  double scale = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) scale = std::max(scale, std::abs(value_of(A[i][j])));
  if (scale == 0.0) return false;
  for (std::size_t k = 0; k < N; ++k) {
    std::size_t piv = k;
    double best = std::abs(value_of(A[k][k]));
    for (std::size_t i = k + 1; i < N; ++i) {
      const double cand = std::abs(value_of(A[i][k]));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (!(best > pivot_tol * scale)) return false;
    if (piv != k) {
      std::swap(A[piv], A[k]);
      std::swap(b[piv], b[k]);
    }
    const T inv = 1.0 / A[k][k];
    for (std::size_t i = k + 1; i < N; ++i) {
      if (value_of(A[i][k]) == 0.0) continue;
      const T f = A[i][k] * inv;
      for (std::size_t j = k + 1; j < N; ++j) A[i][j] = A[i][j] - f * A[k][j];
      b[i] = b[i] - f * b[k];
    }
  }
  for (std::size_t k = N; k-- > 0;) {
    T acc = b[k];
    for (std::size_t j = k + 1; j < N; ++j) acc = acc - A[k][j] * b[j];
    b[k] = acc / A[k][k];
  }
  return true;
}

/// Flight: M qdd = h + B u. Returns false if M is singular.
template <typename T>
bool flight_accel(const Vec5T<T>& q, const Vec5T<T>& qd, const std::array<T, 2>& u, const T& k_l,
                  const ModelParams& p, Vec5T<T>& qdd) {
  auto M = mass_matrix(q, p);
  qdd = bias_forces(q, qd, k_l, p);
  qdd[3] = qdd[3] + u[0];
  qdd[4] = qdd[4] + u[1];
  return solve_in_place(M, qdd);
}

/// Stance: [[M, -W^T], [W, 0]] [qdd; lambda] = [h + B u; -Wdot qdot].
template <typename T>
bool stance_accel(const Vec5T<T>& q, const Vec5T<T>& qd, const std::array<T, 2>& u, const T& k_l,
                  const ModelParams& p, Vec5T<T>& qdd, std::array<T, 2>& lambda) {
  const auto M = mass_matrix(q, p);
  const auto h = bias_forces(q, qd, k_l, p);
  const auto W = contact_jacobian(q, p);
  const auto drift = contact_drift(q, qd);
  std::array<std::array<T, 7>, 7> K{};
  std::array<T, 7> rhs{};
  for (int i = 0; i < kNq; ++i) {
    for (int j = 0; j < kNq; ++j) K[i][j] = M[i][j];
    K[i][5] = -W[0][i];
    K[i][6] = -W[1][i];
    K[5][i] = W[0][i];
    K[6][i] = W[1][i];
    rhs[i] = h[i];
  }
  rhs[3] = rhs[3] + u[0];
  rhs[4] = rhs[4] + u[1];
  rhs[5] = -drift[0];
  rhs[6] = -drift[1];
  if (!solve_in_place(K, rhs)) return false;
  for (int i = 0; i < kNq; ++i) qdd[i] = rhs[i];
  lambda = {rhs[5], rhs[6]};
  return true;
}

/// Rigid inelastic impact: [[M, -W^T], [W, 0]] [qd+; Lambda] = [M qd-; 0].
template <typename T>
bool impact(const Vec5T<T>& q, const Vec5T<T>& qd_minus, const ModelParams& p, Vec5T<T>& qd_plus,
            std::array<T, 2>& impulse) {
  const auto M = mass_matrix(q, p);
  const auto W = contact_jacobian(q, p);
  std::array<std::array<T, 7>, 7> K{};
  std::array<T, 7> rhs{};
  for (int i = 0; i < kNq; ++i) {
    T acc(0.0);
    for (int j = 0; j < kNq; ++j) {
      K[i][j] = M[i][j];
      acc = acc + M[i][j] * qd_minus[j];
    }
    K[i][5] = -W[0][i];
    K[i][6] = -W[1][i];
    K[5][i] = W[0][i];
    K[6][i] = W[1][i];
    rhs[i] = acc;
  }
  if (!solve_in_place(K, rhs)) return false;
  for (int i = 0; i < kNq; ++i) qd_plus[i] = rhs[i];
  impulse = {rhs[5], rhs[6]};
  return true;
}

}  // namespace hopper::kernels
