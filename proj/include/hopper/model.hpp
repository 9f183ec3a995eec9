// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <stdexcept>

#include "hopper/params.hpp"

namespace hopper {

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat25 = Eigen::Matrix<double, 2, 5>;
using Mat52 = Eigen::Matrix<double, 5, 2>;

inline constexpr int kNumCoords = 5;
inline constexpr int kStateDim = 10;
inline constexpr int kInputDim = 2;

enum Coord : int { kX = 0, kY = 1, kPhi = 2, kAlpha = 3, kLeg = 4 };

/// Singular mass matrix or otherwise unevaluable dynamics.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stance or impact KKT system without a unique solution.
class ConstraintDegeneracyError : public ModelError {
 public:
  using ModelError::ModelError;
};

enum class Phase { kStance, kFlight };

const char* to_string(Phase phase);

/// Generalized coordinates q = [x, y, phi, alpha, l] and their rates.
struct State {
  Vec5 q = Vec5::Zero();
  Vec5 qdot = Vec5::Zero();

  Vec10 stacked() const;
  static State from_stacked(const Vec10& x);
};

/// Hip torque and leg force.
struct ControlInput {
  double tau = 0.0;
  double force = 0.0;

  Vec2 vec() const { return {tau, force}; }
};

/// Offset of the rolling constraint, fixed by the touchdown configuration.
struct ContactContext {
  double d0 = 0.0;

  static ContactContext at_touchdown(const Vec5& q, const ModelParams& p);
};

struct DampingCoefficients {
  double leg = 0.0;
  double hip = 0.0;
};

/// Leg and hip damping for constant damping ratios. Throws DomainError for
/// negative k_l.
DampingCoefficients damping_coefficients(double k_l, const ModelParams& p);

Vec2 contact_constraints(const Vec5& q, const ContactContext& ctx, const ModelParams& p);

struct ContactJacobian {
  Mat25 W;
  Vec2 drift;  // Wdot(q, qdot) * qdot
};

ContactJacobian contact_jacobian(const Vec5& q, const Vec5& qdot, const ModelParams& p);

/// Throws ModelError when the condition number exceeds 1e12.
Mat5 mass_matrix(const Vec5& q, const ModelParams& p);
Vec5 bias_forces(const Vec5& q, const Vec5& qdot, double k_l, const ModelParams& p);
Mat52 input_matrix();

struct StanceDerivative {
  Vec10 xdot;
  Vec2 lambda;  // contact force on the foot, lambda_y > 0 pushes up
};

StanceDerivative stance_dynamics(const State& x, const ControlInput& u, double k_l, const ModelParams& p);
Vec10 flight_dynamics(const State& x, const ControlInput& u, double k_l, const ModelParams& p);

struct ImpactResult {
  State post;
  Vec2 impulse;
};

/// Post-impact state for a touchdown configuration (q unchanged).
ImpactResult impact_map(const State& pre, const ModelParams& p);

/// Normal contact force; the stance phase ends where it crosses zero.
double liftoff_event(const State& x, const ControlInput& u, double k_l, const ModelParams& p);
/// Foot height above ground; the flight phase ends where it crosses zero.
double touchdown_event(const State& x, const ModelParams& p);

/// Thermal-loss integrand u^T K u with K = diag(m sqrt(g l0^3), m sqrt(g/l0))^-1.
double running_cost(const ControlInput& u, const ModelParams& p);

// Energies used by tests and the simulator audit.
double kinetic_energy(const State& x, const ModelParams& p);
/// Gravity plus spring potentials.
double potential_energy(const State& x, double k_l, const ModelParams& p);
/// Horizontal and vertical center-of-mass position.
Vec2 center_of_mass(const Vec5& q, const ModelParams& p);

/// Jacobians of the phase vector fields with respect to z = [x, u, k_l]
/// (10 x 13), computed by forward-mode differentiation.
Eigen::Matrix<double, 10, 13> stance_dynamics_jacobian(const State& x, const ControlInput& u, double k_l,
                                                       const ModelParams& p);
Eigen::Matrix<double, 10, 13> flight_dynamics_jacobian(const State& x, const ControlInput& u, double k_l,
                                                       const ModelParams& p);

}  // namespace hopper
