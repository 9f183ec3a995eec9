// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// In-tree NLP backends.
//
// Both work in scaled coordinates: variables are divided by the problem's
// variable scale, rows and the objective are scaled down so that their
// largest gradient entry at the starting point is at most 100. Inequality
// rows c_lo <= c(a) <= c_hi become c(a) - s = 0 with a bounded slack s.
//
// InteriorPointSolver (default): primal-dual log-barrier method with a
// filter line search, second-order corrections and a feasibility
// restoration phase. The regularized KKT matrix is factored by a sparse
// LDL^T whose pivot signs double as the inertia test.
//
// AugmentedLagrangianSolver: bound-constrained augmented Lagrangian,
//   min f + mu^T h + rho/2 |h|^2  s.t.  lo <= z <= hi,
// solved by projected Newton on an epsilon-active set.

#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>

#include "hopper/nlp.hpp"

namespace hopper::nlp {

/// Mismatched dimensions or invalid options.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Backend { kInteriorPoint, kAugmentedLagrangian };

struct SolverOptions {
  double tol_eq = 1e-6;
  double tol_stat = 1e-6;
  Backend backend = Backend::kInteriorPoint;
  // Interior point.
  int max_iterations = 3000;
  double mu_init = 0.1;
  // Augmented Lagrangian.
  int max_outer = 50;
  int max_inner = 200;
  double penalty_growth = 10.0;
  double initial_penalty = 10.0;
  double max_penalty = 1e10;
  double regularization_floor = 1e-10;
  double max_wall_seconds = std::numeric_limits<double>::infinity();
  std::ostream* log = nullptr;

  void validate() const;
};

enum class SolveStatus { kConverged, kMaxIter, kInfeasible, kNumericalFailure };
std::string to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector x;
  double objective = 0.0;
  /// Lagrange multipliers of the constraint rows, sign convention
  /// L = f + y^T c.
  Vector multipliers;
  double feasibility = 0.0;   // max violation of rows and bounds
  double stationarity = 0.0;  // projected Lagrangian gradient (scaled space)
  int outer_iterations = 0;  // barrier or penalty updates
  int inner_iterations = 0;  // Newton steps
  double wall_seconds = 0.0;
  /// Row whose callback produced NaN, or -1.
  int failed_constraint = -1;
  std::string message;

  bool converged() const { return status == SolveStatus::kConverged; }
};

/// Backend contract. Any backend reporting kConverged must satisfy
/// `meets_tolerances`.
class NlpSolver {
 public:
  virtual ~NlpSolver() = default;
  virtual std::string name() const = 0;
  /// `y0` warm-starts the multipliers (empty: zeros).
  virtual SolveResult solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options,
                            const Vector& y0 = {}) const = 0;
};

class InteriorPointSolver : public NlpSolver {
 public:
  std::string name() const override { return "interior-point"; }
  SolveResult solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options,
                    const Vector& y0 = {}) const override;
};

class AugmentedLagrangianSolver : public NlpSolver {
 public:
  std::string name() const override { return "augmented-lagrangian"; }
  SolveResult solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options,
                    const Vector& y0 = {}) const override;
};

/// Solves with the backend selected in `options`.
SolveResult solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options = {},
                  const Vector& y0 = {});

/// Re-evaluates feasibility of `x` against rows and bounds.
double max_violation(const NlpProblem& problem, const Vector& x);

/// Residual assertions every converged result must pass.
bool meets_tolerances(const NlpProblem& problem, const SolveResult& result, const SolverOptions& options);

}  // namespace hopper::nlp
