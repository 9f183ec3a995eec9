// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

// Internal to the solver backends.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hopper/solver.hpp"

namespace hopper::nlp::detail {

inline int first_nonfinite(const Vector& v) {
  for (int i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return i;
  return -1;
}

// Problem in scaled coordinates. The decision vector z = [a / S; s] stacks
// the scaled variables and the inequality slacks; rows become equalities
// h = Dc (c - target) with target the fixed value or the slack.
class ScaledProblem {
 public:
  ScaledProblem(const NlpProblem& p, const Vector& x0) : p_(p), n_(p.num_variables()), m_(p.num_constraints()) {
    S_ = p.variable_scale();
    const Vector& clo = p.constraint_lower();
    const Vector& chi = p.constraint_upper();
    for (int i = 0; i < m_; ++i) {
      if (clo[i] != chi[i]) {
        slack_row_.push_back(i);
      }
    }
    ns_ = static_cast<int>(slack_row_.size());
    lo_.resize(n_ + ns_);
    hi_.resize(n_ + ns_);
    lo_.head(n_) = p.variable_lower().cwiseQuotient(S_);
    hi_.head(n_) = p.variable_upper().cwiseQuotient(S_);
    for (int k = 0; k < ns_; ++k) {
      lo_[n_ + k] = clo[slack_row_[k]];
      hi_[n_ + k] = chi[slack_row_[k]];
    }
    slack_of_row_.assign(m_, -1);
    for (int k = 0; k < ns_; ++k) slack_of_row_[slack_row_[k]] = k;

    // Gradient-based row and objective scaling at the starting point.
    Dc_ = Vector::Ones(m_);
    sf_ = 1.0;
    const Vector xs = x0.cwiseMax(p.variable_lower()).cwiseMin(p.variable_upper());
    const SparseMatrix J = p.jacobian(xs);
    Vector rowmax = Vector::Zero(m_);
    for (int col = 0; col < J.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(J, col); it; ++it)
        rowmax[it.row()] = std::max(rowmax[it.row()], std::abs(it.value() * S_[col]));
    for (int i = 0; i < m_; ++i)
      if (std::isfinite(rowmax[i])) Dc_[i] = std::min(1.0, kScaleTarget / std::max(rowmax[i], 1e-12));
    const Vector g = p.objective_gradient(xs).cwiseProduct(S_);
    const double gmax = g.cwiseAbs().maxCoeff();
    if (std::isfinite(gmax)) sf_ = std::min(1.0, kScaleTarget / std::max(gmax, 1e-12));
  }

  int n() const { return n_; }
  int nz() const { return n_ + ns_; }
  int m() const { return m_; }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  const Vector& row_scale() const { return Dc_; }

  Vector to_z(const Vector& x) const {
    Vector z(nz());
    z.head(n_) = x.cwiseQuotient(S_);
    const Vector c = p_.constraints(x);
    for (int k = 0; k < ns_; ++k) z[n_ + k] = c[slack_row_[k]];
    return z.cwiseMax(lo_).cwiseMin(hi_);
  }
  Vector to_x(const Vector& z) const { return z.head(n_).cwiseProduct(S_); }

  /// Scaled residual h(z) and scaled objective.
  struct Eval {
    double f = 0.0;
    Vector h;
    int bad_row = -1;
    bool finite = true;
  };
  Eval evaluate(const Vector& z) const {
    Eval e;
    const Vector x = to_x(z);
    e.f = sf_ * p_.objective(x);
    const Vector c = p_.constraints(x);
    e.h.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const int k = slack_of_row_[i];
      const double target = k < 0 ? p_.constraint_lower()[i] : z[n_ + k];
      e.h[i] = Dc_[i] * (c[i] - target);
    }
    e.bad_row = first_nonfinite(c);
    e.finite = std::isfinite(e.f) && e.bad_row < 0;
    return e;
  }
  /// Unscaled constraint residual for termination.
  double raw_violation(const Vector& h) const { return h.cwiseQuotient(Dc_).cwiseAbs().maxCoeff(); }

  /// Scaled objective gradient (size nz) and scaled Jacobian (m x nz).
  void derivatives(const Vector& z, Vector& gf, SparseMatrix& J) const {
    const Vector x = to_x(z);
    gf = Vector::Zero(nz());
    gf.head(n_) = sf_ * p_.objective_gradient(x).cwiseProduct(S_);
    const SparseMatrix Jx = p_.jacobian(x);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(Jx.nonZeros() + ns_);
    for (int col = 0; col < Jx.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(Jx, col); it; ++it)
        t.emplace_back(it.row(), col, Dc_[it.row()] * it.value() * S_[col]);
    for (int k = 0; k < ns_; ++k) t.emplace_back(slack_row_[k], n_ + k, -Dc_[slack_row_[k]]);
    J.resize(m_, nz());
    J.setFromTriplets(t.begin(), t.end());
  }

  /// Lower triangle of the scaled Lagrangian Hessian for scaled weights w.
  SparseMatrix hessian(const Vector& z, const Vector& w) const {
    const SparseMatrix H = p_.lagrangian_hessian(to_x(z), sf_, Dc_.cwiseProduct(w));
    SparseMatrix out = H;
    for (int col = 0; col < out.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(out, col); it; ++it) it.valueRef() *= S_[it.row()] * S_[col];
    return out;
  }

  /// Multipliers of the original rows from scaled ones.
  Vector unscale_multipliers(const Vector& mu) const { return Dc_.cwiseProduct(mu) / sf_; }
  Vector scale_multipliers(const Vector& y) const { return (sf_ * y).cwiseQuotient(Dc_); }

 private:
  static constexpr double kScaleTarget = 100.0;
  const NlpProblem& p_;
  int n_, m_, ns_ = 0;
  Vector S_, Dc_, lo_, hi_;
  double sf_ = 1.0;
  std::vector<int> slack_row_, slack_of_row_;
};

}  // namespace hopper::nlp::detail
