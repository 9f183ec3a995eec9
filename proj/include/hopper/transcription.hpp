// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Separated Hermite-Simpson transcription of one periodic hopping stride.
//
// Each phase has 2N+1 nodes (knots at even, segment midpoints at odd
// indices). A node stores the lifted state y = [x, u, dt, k_l] and the input
// rate v:
//
//   [ x(10) | u(2) | dt | k_l | v(2) ]   (16 scalars)
//
// The pseudo-states dt and k_l have zero dynamics, so every collocation row
// touches only the three nodes of its own segment.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopper/model.hpp"
#include "hopper/nlp.hpp"

namespace hopper {

namespace node {
inline constexpr int kX = 0;
inline constexpr int kU = 10;
inline constexpr int kDt = 12;
inline constexpr int kK = 13;
inline constexpr int kV = 14;
inline constexpr int kSize = 16;
inline constexpr int kLifted = 14;  // y = [x, u, dt, k_l]
}  // namespace node

using NodeVector = Eigen::Matrix<double, node::kSize, 1>;
using Lifted = Eigen::Matrix<double, node::kLifted, 1>;
using DefectVector = Eigen::Matrix<double, 30, 1>;

/// Invalid transcription settings (N < 2, non-positive speed, ...).
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Box limits on the node variables. Values outside the named fields are
/// unbounded.
struct BoundsConfig {
  double tau_max = 3.0;
  double force_max = 10.0;
  double leg_min = 0.2;
  double leg_max = 1.2;
  double alpha_max = 1.5707963267948966;
  double phi_max = 1.5707963267948966;
  double y_min = 0.1;
  double y_max = 3.0;
  double dt_min = 1e-3;
  double dt_max = 0.2;
  double k_min = 0.5;
  double k_max = 20.0;

  void validate() const;
  /// Stable hex digest of all fields, stored with every gait.
  std::string hash() const;
  std::string to_text() const;
  static BoundsConfig parse(const std::string& text);
};

struct StiffnessMode {
  enum class Kind { kFixed, kFree } kind = Kind::kFree;
  double value = 0.0;  // k_bar when fixed

  static StiffnessMode fixed(double k) { return {Kind::kFixed, k}; }
  static StiffnessMode free() { return {Kind::kFree, 0.0}; }
  bool is_fixed() const { return kind == Kind::kFixed; }
};

/// Lifted vector field [f_phase(x, u; k_l), v, 0, 0].
Lifted lifted_dynamics(const NodeVector& node, Phase phase, const ModelParams& p);

/// Collocation residual blocks for one segment given the lifted vector
/// field at its three nodes:
///   [0, 14)   y_m - (y_a + y_b)/2 - dt_a/8 (F_a - F_b)
///   [14, 28)  F_m - (3/(2 dt_a)) (y_b - y_a) + (F_a + F_b)/4
///   [28, 30)  v_m - (v_a + v_b)/2
/// Dynamics-agnostic; used directly by tests with synthetic fields.
DefectVector hermite_defect_blocks(const NodeVector& a, const NodeVector& m, const NodeVector& b, const Lifted& f_a,
                                   const Lifted& f_m, const Lifted& f_b);

/// Collocation residual of one segment of the given phase.
DefectVector hermite_defects(const NodeVector& a, const NodeVector& m, const NodeVector& b, Phase phase,
                             const ModelParams& p);

/// Simpson quadrature of the running cost over one phase's 2N+1 nodes:
/// sum_k dt_k/6 (w_k + 4 w_{k+1/2} + w_{k+1}).
double simpson_cost(const std::vector<NodeVector>& nodes, const ModelParams& p);

/// Layout and views of a stride decision vector.
struct StrideLayout {
  int segments = 0;  // N per phase

  int nodes_per_phase() const { return 2 * segments + 1; }
  int phase_size() const { return node::kSize * nodes_per_phase(); }
  int size() const { return 2 * phase_size(); }
  /// Offset of node j of a phase in the decision vector.
  int offset(Phase phase, int j) const {
    return (phase == Phase::kStance ? 0 : phase_size()) + node::kSize * j;
  }
  NodeVector node(const nlp::Vector& a, Phase phase, int j) const { return a.segment<node::kSize>(offset(phase, j)); }
  std::vector<NodeVector> phase_nodes(const nlp::Vector& a, Phase phase) const;

  double duration(const nlp::Vector& a, Phase phase) const {
    return segments * a[offset(phase, 0) + node::kDt];
  }
  double stiffness(const nlp::Vector& a) const { return a[offset(Phase::kStance, 0) + node::kK]; }
};

/// Problem statistics for diagnostics dumps.
struct ProblemStats {
  int variables = 0;
  int equalities = 0;
  int inequalities = 0;
  int jacobian_nonzeros = 0;
  int hessian_nonzeros = 0;
  double jacobian_density = 0.0;
  std::string to_json() const;
};

/// The stride NLP: fixed stiffness (one extra equality pinning k_l) or free
/// stiffness. Constraint rows, in order:
///   per phase, per segment: 30 collocation rows
///   liftoff (lambda_y = 0 at the last stance node)
///   phase linkage x^F_0 = x^S_2N (10)
///   stiffness continuity k^S_0 = k^F_0
///   touchdown c_y(x^F_2N) = 0
///   periodicity x^S_0 = S g(x^F_2N) (10; row 0 anchors x^S(0) = 0)
///   speed v_avg (t^S + t^F) = x^F(t^F)
///   [fixed mode] k^S_0 = k_bar
///   lambda_y >= 0 at every stance node (2N+1 inequalities)
class GaitNlp : public nlp::NlpProblem {
 public:
  GaitNlp(double v_avg, StiffnessMode stiffness, int segments, const BoundsConfig& bounds, const ModelParams& p);

  int num_variables() const override { return layout_.size(); }
  int num_constraints() const override { return static_cast<int>(c_lo_.size()); }
  const nlp::Vector& variable_lower() const override { return a_lo_; }
  const nlp::Vector& variable_upper() const override { return a_hi_; }
  const nlp::Vector& constraint_lower() const override { return c_lo_; }
  const nlp::Vector& constraint_upper() const override { return c_hi_; }

  double objective(const nlp::Vector& a) const override;
  nlp::Vector objective_gradient(const nlp::Vector& a) const override;
  nlp::Vector constraints(const nlp::Vector& a) const override;
  nlp::SparseMatrix jacobian(const nlp::Vector& a) const override;
  nlp::SparseMatrix lagrangian_hessian(const nlp::Vector& a, double sigma, const nlp::Vector& y) const override;
  nlp::Vector variable_scale() const override;
  std::string variable_name(int i) const override;
  std::string constraint_name(int i) const override;

  /// Replaces the variable box (e.g. trust regions or frozen durations
  /// during warm starts). Sizes must match.
  void set_variable_bounds(const nlp::Vector& lower, const nlp::Vector& upper);
  void reset_variable_bounds();

  const StrideLayout& layout() const { return layout_; }
  double speed() const { return v_avg_; }
  const StiffnessMode& stiffness() const { return stiffness_; }
  const BoundsConfig& bounds() const { return bounds_; }
  const ModelParams& params() const { return p_; }
  int num_equalities() const { return num_equalities_; }
  int num_inequalities() const { return num_constraints() - num_equalities_; }

  /// Cost of transport of a decision vector: objective without scaling.
  double cost_of_transport(const nlp::Vector& a) const { return objective(a); }
  /// Max |violation| over all constraint rows and variable bounds.
  double max_violation(const nlp::Vector& a) const;

  /// Column support of every Jacobian row (structural pattern).
  std::vector<std::vector<int>> jacobian_row_support() const;
  ProblemStats stats() const;

 private:
  struct Pattern;

  template <typename Sink>
  void emit_jacobian(const nlp::Vector& a, Sink& sink) const;
  template <typename Sink>
  void emit_hessian(const nlp::Vector& a, double sigma, const nlp::Vector& y, Sink& sink) const;

  double v_avg_;
  StiffnessMode stiffness_;
  StrideLayout layout_;
  BoundsConfig bounds_;
  ModelParams p_;
  nlp::Vector a_lo_, a_hi_, default_lo_, default_hi_;
  nlp::Vector c_lo_, c_hi_;
  int num_equalities_ = 0;
  // Row offsets of the boundary blocks.
  int row_liftoff_ = 0, row_link_ = 0, row_kcont_ = 0, row_touchdown_ = 0, row_periodic_ = 0, row_speed_ = 0,
      row_fixed_ = -1, row_ineq_ = 0;
  std::shared_ptr<const Pattern> jac_pattern_;
  std::shared_ptr<const Pattern> hess_pattern_;
};

/// Validated constructor wrapper.
std::unique_ptr<GaitNlp> build_nlp(double v_avg, StiffnessMode stiffness, int segments, const BoundsConfig& bounds,
                                   const ModelParams& p);

}  // namespace hopper
