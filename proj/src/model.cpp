// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "hopper/model_kernels.hpp"

namespace hopper {

namespace k = kernels;

namespace {

k::Vec5T<double> arr(const Vec5& v) {
  k::Vec5T<double> a;
  for (int i = 0; i < 5; ++i) a[i] = v[i];
  return a;
}

Vec5 vec(const k::Vec5T<double>& a) {
  Vec5 v;
  for (int i = 0; i < 5; ++i) v[i] = a[i];
  return v;
}

template <typename Dyn>
Eigen::Matrix<double, 10, 13> dynamics_jacobian(const State& x, const ControlInput& u, double k_l, Dyn&& dyn) {
  using D = ad::Dual<double, 13>;
  k::Vec5T<D> q, qd;
  for (int i = 0; i < 5; ++i) {
    q[i] = ad::variable<13>(x.q[i], i);
    qd[i] = ad::variable<13>(x.qdot[i], 5 + i);
  }
  const std::array<D, 2> uu{ad::variable<13>(u.tau, 10), ad::variable<13>(u.force, 11)};
  const D kk = ad::variable<13>(k_l, 12);
  k::Vec5T<D> qdd;
  dyn(q, qd, uu, kk, qdd);
  Eigen::Matrix<double, 10, 13> J = Eigen::Matrix<double, 10, 13>::Zero();
  for (int i = 0; i < 5; ++i) {
    J(i, 5 + i) = 1.0;
    for (int j = 0; j < 13; ++j) J(5 + i, j) = qdd[i].d[j];
  }
  return J;
}

}  // namespace

const char* to_string(Phase phase) { return phase == Phase::kStance ? "stance" : "flight"; }

Vec10 State::stacked() const {
  Vec10 x;
  x << q, qdot;
  return x;
}

State State::from_stacked(const Vec10& x) { return State{x.head<5>(), x.tail<5>()}; }

ContactContext ContactContext::at_touchdown(const Vec5& q, const ModelParams& p) {
  const double theta = q[kPhi] + q[kAlpha];
  return {q[kX] + theta * p.r_f + q[kLeg] * std::sin(theta)};
}

DampingCoefficients damping_coefficients(double k_l, const ModelParams& p) {
  if (!(k_l >= 0.0)) throw DomainError("leg stiffness must be non-negative, got " + std::to_string(k_l));
  return {k::leg_damping(k_l, p), k::hip_damping(p)};
}

Vec2 contact_constraints(const Vec5& q, const ContactContext& ctx, const ModelParams& p) {
  const double theta = q[kPhi] + q[kAlpha];
  return {q[kX] + p.r_f * theta + q[kLeg] * std::sin(theta) - ctx.d0,
          q[kY] - q[kLeg] * std::cos(theta) - p.r_f};
}

ContactJacobian contact_jacobian(const Vec5& q, const Vec5& qdot, const ModelParams& p) {
  const auto rows = k::contact_jacobian(arr(q), p);
  const auto drift = k::contact_drift(arr(q), arr(qdot));
  ContactJacobian out;
  for (int j = 0; j < 5; ++j) {
    out.W(0, j) = rows[0][j];
    out.W(1, j) = rows[1][j];
  }
  out.drift = {drift[0], drift[1]};
  return out;
}

Mat5 mass_matrix(const Vec5& q, const ModelParams& p) {
  const auto Ma = k::mass_matrix(arr(q), p);
  Mat5 M;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) M(i, j) = Ma[i][j];
  Eigen::SelfAdjointEigenSolver<Mat5> eig(M, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw ModelError("mass matrix is numerically singular");
  return M;
}

Vec5 bias_forces(const Vec5& q, const Vec5& qdot, double k_l, const ModelParams& p) {
  if (!(k_l >= 0.0)) throw DomainError("leg stiffness must be non-negative");
  return vec(k::bias_forces(arr(q), arr(qdot), k_l, p));
}

Mat52 input_matrix() {
  Mat52 B = Mat52::Zero();
  B(kAlpha, 0) = 1.0;
  B(kLeg, 1) = 1.0;
  return B;
}

StanceDerivative stance_dynamics(const State& x, const ControlInput& u, double k_l, const ModelParams& p) {
  if (!(k_l >= 0.0)) throw DomainError("leg stiffness must be non-negative");
  k::Vec5T<double> qdd;
  std::array<double, 2> lambda;
  if (!k::stance_accel(arr(x.q), arr(x.qdot), {u.tau, u.force}, k_l, p, qdd, lambda)) {
    throw ConstraintDegeneracyError("stance KKT system is singular");
  }
  StanceDerivative out;
  out.xdot << x.qdot, vec(qdd);
  out.lambda = {lambda[0], lambda[1]};
  return out;
}

Vec10 flight_dynamics(const State& x, const ControlInput& u, double k_l, const ModelParams& p) {
  if (!(k_l >= 0.0)) throw DomainError("leg stiffness must be non-negative");
  k::Vec5T<double> qdd;
  if (!k::flight_accel(arr(x.q), arr(x.qdot), {u.tau, u.force}, k_l, p, qdd)) {
    throw ModelError("mass matrix is singular");
  }
  Vec10 xdot;
  xdot << x.qdot, vec(qdd);
  return xdot;
}

ImpactResult impact_map(const State& pre, const ModelParams& p) {
  k::Vec5T<double> qd_plus;
  std::array<double, 2> impulse;
  if (!k::impact(arr(pre.q), arr(pre.qdot), p, qd_plus, impulse)) {
    throw ConstraintDegeneracyError("impact KKT system is singular");
  }
  return {State{pre.q, vec(qd_plus)}, Vec2(impulse[0], impulse[1])};
}

double liftoff_event(const State& x, const ControlInput& u, double k_l, const ModelParams& p) {
  return stance_dynamics(x, u, k_l, p).lambda[1];
}

double touchdown_event(const State& x, const ModelParams& p) { return k::touchdown_height(arr(x.q), p); }

double running_cost(const ControlInput& u, const ModelParams& p) {
  const double m = p.total_mass();
  const double k_tau = 1.0 / (m * std::sqrt(p.g * p.l0 * p.l0 * p.l0));
  const double k_force = 1.0 / (m * std::sqrt(p.g / p.l0));
  return k_tau * u.tau * u.tau + k_force * u.force * u.force;
}

double kinetic_energy(const State& x, const ModelParams& p) {
  const auto Ma = k::mass_matrix(arr(x.q), p);
  double T = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) T += 0.5 * x.qdot[i] * Ma[i][j] * x.qdot[j];
  return T;
}

double potential_energy(const State& x, double k_l, const ModelParams& p) {
  const double theta = x.q[kPhi] + x.q[kAlpha];
  const double c = std::cos(theta);
  const double y = x.q[kY];
  const double gravity =
      p.g * (p.m_t * y + p.m_l * (y - p.d_l * c) + p.m_f * (y - (x.q[kLeg] - p.d_f) * c));
  const double stretch = p.l0 - x.q[kLeg];
  return gravity + 0.5 * k_l * stretch * stretch + 0.5 * p.k_alpha * x.q[kAlpha] * x.q[kAlpha];
}

Vec2 center_of_mass(const Vec5& q, const ModelParams& p) {
  const double theta = q[kPhi] + q[kAlpha];
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double lf = q[kLeg] - p.d_f;
  const double m = p.total_mass();
  return {(m * q[kX] + (p.m_l * p.d_l + p.m_f * lf) * s) / m, (m * q[kY] - (p.m_l * p.d_l + p.m_f * lf) * c) / m};
}

Eigen::Matrix<double, 10, 13> stance_dynamics_jacobian(const State& x, const ControlInput& u, double k_l,
                                                       const ModelParams& p) {
  return dynamics_jacobian(x, u, k_l, [&](const auto& q, const auto& qd, const auto& uu, const auto& kk, auto& qdd) {
    std::array<std::decay_t<decltype(kk)>, 2> lambda;
    if (!k::stance_accel(q, qd, uu, kk, p, qdd, lambda)) throw ConstraintDegeneracyError("stance KKT singular");
  });
}

Eigen::Matrix<double, 10, 13> flight_dynamics_jacobian(const State& x, const ControlInput& u, double k_l,
                                                       const ModelParams& p) {
  return dynamics_jacobian(x, u, k_l, [&](const auto& q, const auto& qd, const auto& uu, const auto& kk, auto& qdd) {
    if (!k::flight_accel(q, qd, uu, kk, p, qdd)) throw ModelError("mass matrix singular");
  });
}

}  // namespace hopper
