// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <utility>
#include <vector>

namespace hopper::nlp {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Smooth NLP in the form
///
///   minimize f(a)  s.t.  c_lo <= c(a) <= c_hi,  a_lo <= a <= a_hi.
///
/// Rows with c_lo == c_hi are equalities. Implementations must be reentrant:
/// every callback is const and may run concurrently.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_variables() const = 0;
  virtual int num_constraints() const = 0;

  virtual const Vector& variable_lower() const = 0;
  virtual const Vector& variable_upper() const = 0;
  virtual const Vector& constraint_lower() const = 0;
  virtual const Vector& constraint_upper() const = 0;

  virtual double objective(const Vector& a) const = 0;
  virtual Vector objective_gradient(const Vector& a) const = 0;
  virtual Vector constraints(const Vector& a) const = 0;

  /// Constraint Jacobian (rows = constraints) with a fixed sparsity pattern.
  virtual SparseMatrix jacobian(const Vector& a) const = 0;

  /// Lower triangle of  sigma * grad^2 f + sum_i y_i grad^2 c_i.
  virtual SparseMatrix lagrangian_hessian(const Vector& a, double sigma, const Vector& y) const = 0;

  /// Typical magnitude of each variable; the solver scales by it.
  virtual Vector variable_scale() const { return Vector::Ones(num_variables()); }

  virtual std::string variable_name(int i) const { return "a[" + std::to_string(i) + "]"; }
  virtual std::string constraint_name(int i) const { return "c[" + std::to_string(i) + "]"; }
};

/// Finite-difference comparison of a problem's derivative callbacks.
struct DerivativeReport {
  double objective_gradient_error = 0.0;  // max relative error
  double jacobian_error = 0.0;
  double hessian_error = 0.0;
  int worst_constraint = -1;
  /// Finite-difference nonzeros (> 1e-8) outside the declared pattern.
  int pattern_misses = 0;
  /// Maximum relative error per named constraint block.
  std::vector<std::pair<std::string, double>> block_errors;
};

/// Compares callbacks with central differences of step `h`. The Hessian is
/// checked against differences of the Lagrangian gradient at multipliers `y`
/// (all ones when empty).
DerivativeReport check_derivatives(const NlpProblem& problem, const Vector& point, double h = 1e-6,
                                   const Vector& y = {});

}  // namespace hopper::nlp
