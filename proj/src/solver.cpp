// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/solver.hpp"

#include "scaled_problem.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

namespace hopper::nlp {

void SolverOptions::validate() const {
  if (!(tol_eq > 0) || !(tol_stat > 0)) throw UsageError("solver tolerances must be positive");
  if (!(penalty_growth > 1)) throw UsageError("penalty growth factor must exceed 1");
  if (!(initial_penalty > 0) || !(max_penalty >= initial_penalty)) throw UsageError("invalid penalty range");
  if (max_outer < 1 || max_inner < 1) throw UsageError("iteration caps must be positive");
  if (!(regularization_floor >= 0)) throw UsageError("regularization floor must be non-negative");
  if (max_iterations < 1) throw UsageError("iteration cap must be positive");
  if (!(mu_init > 0)) throw UsageError("initial barrier parameter must be positive");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIter:
      return "max_iter";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

double max_violation(const NlpProblem& problem, const Vector& x) {
  const Vector c = problem.constraints(x);
  double worst = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i])) return std::numeric_limits<double>::infinity();
    worst = std::max({worst, problem.constraint_lower()[i] - c[i], c[i] - problem.constraint_upper()[i]});
  }
  for (int i = 0; i < x.size(); ++i) {
    worst = std::max({worst, problem.variable_lower()[i] - x[i], x[i] - problem.variable_upper()[i]});
  }
  return worst;
}

bool meets_tolerances(const NlpProblem& problem, const SolveResult& result, const SolverOptions& options) {
  if (!result.converged()) return false;
  return max_violation(problem, result.x) <= options.tol_eq && result.stationarity <= options.tol_stat;
}

namespace {

using detail::first_nonfinite;
using detail::ScaledProblem;
using Clock = std::chrono::steady_clock;

double projected_gradient_norm(const Vector& z, const Vector& g, const Vector& lo, const Vector& hi) {
  return ((z - g).cwiseMax(lo).cwiseMin(hi) - z).cwiseAbs().maxCoeff();
}

// Cholesky-type LDL^T of the augmented Lagrangian Hessian
//   H0 + rho J^T J + delta I
// restricted to the free variables, with delta raised until every pivot is
// positive. The symbolic analysis is reused while the pattern holds.
class NewtonSystem {
 public:
  explicit NewtonSystem(double floor) : floor_(floor) {}

  /// Returns false if no admissible regularization was found.
  bool factor(const SparseMatrix& H, const SparseMatrix& J, const std::vector<char>& active, double rho) {
    const int nz = static_cast<int>(active.size());
    Vector mask(nz);
    for (int i = 0; i < nz; ++i) mask[i] = active[i] ? 0.0 : 1.0;
    SparseMatrix Hf = H;
    Hf.conservativeResize(nz, nz);
    Hf = mask.asDiagonal() * Hf * mask.asDiagonal();
    const SparseMatrix Jf = J * mask.asDiagonal();
    const SparseMatrix JtJ = SparseMatrix(Jf.transpose()) * Jf;
    base_ = SparseMatrix(Hf.triangularView<Eigen::Lower>()) + rho * SparseMatrix(JtJ.triangularView<Eigen::Lower>());
    base_.makeCompressed();
    Vector diag_add(nz);
    double scale = 0.0;
    for (int col = 0; col < base_.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(base_, col); it; ++it)
        if (it.row() == col) scale = std::max(scale, std::abs(it.value()));
    double delta = last_delta_ > 0 ? std::max(floor_, last_delta_ / 4.0) : floor_;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (int i = 0; i < nz; ++i) diag_add[i] = active[i] ? 1.0 : delta;
      K_ = base_;
      add_diagonal(diag_add);
      if (!analyzed_ || !same_pattern()) {
        ldlt_.analyzePattern(K_);
        store_pattern();
        analyzed_ = true;
      }
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) {
        const Vector& D = ldlt_.vectorD();
        const double tiny = 1e-14 * std::max(scale, 1.0);
        if (D.allFinite() && D.minCoeff() > tiny) {
          last_delta_ = delta;
          delta_ = delta;
          return true;
        }
      }
      delta = delta < 1e-6 ? 1e-4 : delta * 8.0;
      if (delta > 1e14) break;
    }
    return false;
  }

  Vector solve(const Vector& rhs) const {
    Vector sol = ldlt_.solve(rhs);
    const Vector r = rhs - K_.selfadjointView<Eigen::Lower>() * sol;
    sol += ldlt_.solve(r);
    return sol;
  }

  double delta() const { return delta_; }

 private:
  void add_diagonal(const Vector& d) {
    // Every diagonal entry exists in the pattern; insert missing ones once.
    std::vector<char> seen(d.size(), 0);
    for (int col = 0; col < K_.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(K_, col); it; ++it)
        if (it.row() == col) {
          it.valueRef() += d[col];
          seen[col] = 1;
        }
    bool missing = false;
    for (char c : seen) missing |= !c;
    if (missing) {
      std::vector<Eigen::Triplet<double>> t;
      for (int i = 0; i < d.size(); ++i)
        if (!seen[i]) t.emplace_back(i, i, d[i]);
      SparseMatrix D(K_.rows(), K_.cols());
      D.setFromTriplets(t.begin(), t.end());
      K_ += D;
      K_.makeCompressed();
    }
  }

  bool same_pattern() const {
    if (K_.nonZeros() != static_cast<Eigen::Index>(inner_.size()) || K_.cols() + 1 != static_cast<Eigen::Index>(outer_.size()))
      return false;
    return std::equal(inner_.begin(), inner_.end(), K_.innerIndexPtr()) &&
           std::equal(outer_.begin(), outer_.end(), K_.outerIndexPtr());
  }
  void store_pattern() {
    inner_.assign(K_.innerIndexPtr(), K_.innerIndexPtr() + K_.nonZeros());
    outer_.assign(K_.outerIndexPtr(), K_.outerIndexPtr() + K_.cols() + 1);
  }

  double floor_;
  double last_delta_ = 0.0;
  double delta_ = 0.0;
  bool analyzed_ = false;
  SparseMatrix base_, K_;
  std::vector<int> inner_, outer_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

SolveResult AugmentedLagrangianSolver::solve(const NlpProblem& problem, const Vector& x0,
                                             const SolverOptions& options, const Vector& y0) const {
  options.validate();
  const auto start = Clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  if (x0.size() != problem.num_variables()) throw UsageError("initial guess has the wrong dimension");
  if (y0.size() != 0 && y0.size() != problem.num_constraints()) throw UsageError("initial multipliers have the wrong dimension");

  SolveResult result;
  const auto finish = [&](SolveStatus status, const Vector& x, const Vector& y, double stat, std::string msg) {
    result.status = status;
    result.x = x;
    result.objective = problem.objective(x);
    result.multipliers = y;
    result.feasibility = max_violation(problem, x);
    result.stationarity = stat;
    result.message = std::move(msg);
    result.wall_seconds = elapsed();
    if (status == SolveStatus::kConverged && result.feasibility > options.tol_eq) {
      result.status = SolveStatus::kMaxIter;
      result.message = "residual check failed after unscaling";
    }
    return result;
  };

  const Vector xstart = x0.cwiseMax(problem.variable_lower()).cwiseMin(problem.variable_upper());
  {
    const int bad = first_nonfinite(problem.constraints(xstart));
    if (bad >= 0 || !std::isfinite(problem.objective(xstart))) {
      result.failed_constraint = bad;
      return finish(SolveStatus::kNumericalFailure, xstart, Vector::Zero(problem.num_constraints()), 0.0,
                    bad >= 0 ? "non-finite constraint " + problem.constraint_name(bad) : "non-finite objective");
    }
  }

  ScaledProblem al(problem, xstart);
  const Vector& lo = al.lo();
  const Vector& hi = al.hi();
  Vector z = al.to_z(xstart);
  Vector mu = y0.size() ? al.scale_multipliers(y0) : Vector::Zero(al.m());
  double rho = options.initial_penalty;
  double omega = std::max(options.tol_stat, 1.0 / rho);
  double eta = std::max(0.1 * options.tol_eq, 1.0 / std::pow(rho, 0.1));
  NewtonSystem newton(options.regularization_floor);

  auto ev = al.evaluate(z);
  const auto merit = [&](const ScaledProblem::Eval& e) {
    if (!e.finite) return std::numeric_limits<double>::infinity();
    return e.f + mu.dot(e.h) + 0.5 * rho * e.h.squaredNorm();
  };
  const auto log = [&](const char* fmt, auto... args) {
    if (!options.log) return;
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    *options.log << buf;
  };
  log("%5s %5s %14s %10s %10s %9s %9s %9s\n", "outer", "inner", "objective", "|h|", "pgrad", "rho", "delta", "alpha");

  Vector gf;
  SparseMatrix J;
  double stat = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= options.max_outer; ++outer) {
    result.outer_iterations = outer;
    for (int inner = 0; inner < options.max_inner; ++inner) {
      if (elapsed() > options.max_wall_seconds) {
        return finish(SolveStatus::kMaxIter, al.to_x(z), al.unscale_multipliers(mu + rho * ev.h), stat,
                      "wall-time limit");
      }
      al.derivatives(z, gf, J);
      const Vector pi = mu + rho * ev.h;
      const Vector g = gf + J.transpose() * pi;
      if (!g.allFinite()) {
        result.failed_constraint = first_nonfinite(pi);
        return finish(SolveStatus::kNumericalFailure, al.to_x(z), al.unscale_multipliers(mu), stat,
                      "non-finite gradient");
      }
      const double pg = projected_gradient_norm(z, g, lo, hi);
      stat = pg;
      const double viol = al.raw_violation(ev.h);
      if (viol <= options.tol_eq && pg <= options.tol_stat) {
        return finish(SolveStatus::kConverged, al.to_x(z), al.unscale_multipliers(pi), pg, "converged");
      }
      if (pg <= omega) break;

      // Epsilon-active set.
      const double eps = std::min(1e-3, pg);
      std::vector<char> active(al.nz(), 0);
      for (int i = 0; i < al.nz(); ++i) {
        active[i] = (z[i] <= lo[i] + eps && g[i] > 0) || (z[i] >= hi[i] - eps && g[i] < 0);
      }

      const SparseMatrix H = al.hessian(z, pi);
      if (!newton.factor(H, J, active, rho)) {
        return finish(SolveStatus::kNumericalFailure, al.to_x(z), al.unscale_multipliers(pi), pg,
                      "Newton system could not be regularized");
      }
      Vector rhs = Vector::Zero(al.nz());
      for (int i = 0; i < al.nz(); ++i) rhs[i] = active[i] ? 0.0 : -g[i];
      Vector d = newton.solve(rhs);
      for (int i = 0; i < al.nz(); ++i)
        if (active[i]) d[i] = -g[i];
      if (!d.allFinite()) {
        return finish(SolveStatus::kNumericalFailure, al.to_x(z), al.unscale_multipliers(pi), pg,
                      "non-finite Newton step");
      }

      // Armijo search along the projection arc.
      const double phi0 = merit(ev);
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        const Vector zt = (z + alpha * d).cwiseMax(lo).cwiseMin(hi);
        const double pred = -g.dot(zt - z);
        auto et = al.evaluate(zt);
        const double phit = merit(et);
        if (std::isfinite(phit) && phit <= phi0 - 1e-4 * std::max(pred, 0.0)) {
          z = zt;
          ev = std::move(et);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      ++result.inner_iterations;
      log("%5d %5d %14.7e %10.3e %10.3e %9.2e %9.2e %9.2e\n", outer, inner, ev.f, al.raw_violation(ev.h), pg, rho,
          newton.delta(), accepted ? alpha : 0.0);
      if (!accepted) break;  // stalled: let the outer loop adjust
    }

    const double hn = ev.h.cwiseAbs().maxCoeff();
    if (hn <= eta) {
      mu += rho * ev.h;
      mu = mu.cwiseMax(-1e12).cwiseMin(1e12);
      eta = std::max(0.1 * options.tol_eq, eta / std::pow(rho, 0.9));
      omega = std::max(0.1 * options.tol_stat, omega / rho);
    } else {
      rho *= options.penalty_growth;
      if (rho > options.max_penalty) {
        return finish(SolveStatus::kInfeasible, al.to_x(z), al.unscale_multipliers(mu), stat,
                      "penalty limit reached with residual " + std::to_string(al.raw_violation(ev.h)));
      }
      eta = std::max(0.1 * options.tol_eq, 1.0 / std::pow(rho, 0.1));
      omega = std::max(0.1 * options.tol_stat, 1.0 / rho);
    }
  }
  return finish(SolveStatus::kMaxIter, al.to_x(z), al.unscale_multipliers(mu + rho * ev.h), stat,
                "outer iteration limit");
}

SolveResult solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options, const Vector& y0) {
  if (options.backend == Backend::kAugmentedLagrangian)
    return AugmentedLagrangianSolver().solve(problem, x0, options, y0);
  return InteriorPointSolver().solve(problem, x0, options, y0);
}

}  // namespace hopper::nlp
