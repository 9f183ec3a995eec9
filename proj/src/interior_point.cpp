// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

// Primal-dual log-barrier method with a filter line search.

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "hopper/solver.hpp"
#include "scaled_problem.hpp"

namespace hopper::nlp {
namespace {

using detail::first_nonfinite;
using detail::ScaledProblem;
using Clock = std::chrono::steady_clock;
using Eval = ScaledProblem::Eval;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Barrier schedule.
constexpr double kKappaEps = 10.0;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kTauMin = 0.99;
// Filter and Armijo constants.
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kEtaPhi = 1e-8;
constexpr double kSTheta = 1.1;
constexpr double kSPhi = 2.3;
constexpr double kGammaAlpha = 0.05;
constexpr double kKappaSoc = 0.99;
constexpr int kMaxSoc = 4;
// Bound multipliers stay within [1/k, k] times mu / slack.
constexpr double kKappaSigma = 1e10;
// Constraint block regularization keeping LDL^T pivots nonzero.
constexpr double kDeltaC = 1e-8;
constexpr double kBoundRelax = 1e-8;
constexpr double kSMax = 100.0;
constexpr double kMaxMultiplier = 1e6;

// LDL^T of the quasi-definite matrix
//   [ W + diag(d)   J^T   ]
//   [ J            -dc I  ]
// Without pivoting the signs of D give the inertia.
class KktSystem {
 public:
  bool factor(const SparseMatrix& W, const Vector& d, const SparseMatrix& J, double dc) {
    n_ = static_cast<int>(d.size());
    m_ = static_cast<int>(J.rows());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(W.nonZeros() + J.nonZeros() + n_ + m_);
    for (int col = 0; col < W.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(W, col); it; ++it)
        if (it.row() >= col) t.emplace_back(it.row(), col, it.value());
    for (int i = 0; i < n_; ++i) t.emplace_back(i, i, d[i]);
    for (int col = 0; col < J.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(J, col); it; ++it) t.emplace_back(n_ + it.row(), col, it.value());
    for (int i = 0; i < m_; ++i) t.emplace_back(n_ + i, n_ + i, -dc);
    K_.resize(n_ + m_, n_ + m_);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    if (!analyzed_ || !same_pattern()) {
      ldlt_.analyzePattern(K_);
      inner_.assign(K_.innerIndexPtr(), K_.innerIndexPtr() + K_.nonZeros());
      outer_.assign(K_.outerIndexPtr(), K_.outerIndexPtr() + K_.cols() + 1);
      analyzed_ = true;
    }
    ldlt_.factorize(K_);
    if (ldlt_.info() != Eigen::Success) return false;
    const Vector& D = ldlt_.vectorD();
    if (!D.allFinite()) return false;
    pos_ = neg_ = 0;
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      if (D[i] > 0) ++pos_;
      if (D[i] < 0) ++neg_;
    }
    return true;
  }
  bool inertia_ok() const { return pos_ == n_ && neg_ == m_; }

  Vector solve(const Vector& rhs) const {
    Vector sol = ldlt_.solve(rhs);
    for (int k = 0; k < 2; ++k) {
      const Vector r = rhs - K_.selfadjointView<Eigen::Lower>() * sol;
      sol += ldlt_.solve(r);
    }
    return sol;
  }

 private:
  bool same_pattern() const {
    if (K_.nonZeros() != static_cast<Eigen::Index>(inner_.size()) ||
        K_.cols() + 1 != static_cast<Eigen::Index>(outer_.size()))
      return false;
    return std::equal(inner_.begin(), inner_.end(), K_.innerIndexPtr()) &&
           std::equal(outer_.begin(), outer_.end(), K_.outerIndexPtr());
  }

  int n_ = 0, m_ = 0, pos_ = 0, neg_ = 0;
  bool analyzed_ = false;
  SparseMatrix K_;
  std::vector<int> inner_, outer_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& p, const SolverOptions& o, const Vector& xstart, Clock::time_point start)
      : p_(p), o_(o), sp_(p, xstart), nz_(sp_.nz()), m_(sp_.m()), start_(start) {
    lo_ = sp_.lo();
    hi_ = sp_.hi();
    x_ = sp_.to_z(xstart);
    fixed_.assign(nz_, 0);
    free_ = Vector::Ones(nz_);
    const double push = std::min(1e-2, o.mu_init);
    for (int i = 0; i < nz_; ++i) {
      const double l = lo_[i], u = hi_[i];
      if (std::isfinite(l) && u - l <= 1e-12 * std::max(1.0, std::abs(l))) {
        fixed_[i] = 1;
        free_[i] = 0.0;
        x_[i] = l;
        hi_[i] = l;
        continue;
      }
      if (std::isfinite(l)) lo_[i] = l - kBoundRelax * std::max(1.0, std::abs(l));
      if (std::isfinite(u)) hi_[i] = u + kBoundRelax * std::max(1.0, std::abs(u));
      double pl = push * std::max(1.0, std::abs(lo_[i]));
      double pu = push * std::max(1.0, std::abs(hi_[i]));
      if (std::isfinite(l) && std::isfinite(u)) {
        pl = std::min(pl, push * (hi_[i] - lo_[i]));
        pu = std::min(pu, push * (hi_[i] - lo_[i]));
      }
      if (has_lo(i)) x_[i] = std::max(x_[i], lo_[i] + pl);
      if (has_hi(i)) x_[i] = std::min(x_[i], hi_[i] - pu);
    }
    mu_ = o.mu_init;
    tau_ = std::max(kTauMin, 1.0 - mu_);
    mu_min_ = std::min(o.tol_eq, o.tol_stat) / 10.0;
    zl_ = Vector::Zero(nz_);
    zu_ = Vector::Zero(nz_);
    center_bound_multipliers();
  }

  SolveResult run(const Vector& y0) {
    ev_ = sp_.evaluate(x_);
    if (!ev_.finite) {
      result_.failed_constraint = ev_.bad_row;
      return finish(SolveStatus::kNumericalFailure, "non-finite functions at the interior starting point");
    }
    sp_.derivatives(x_, gf_, J_);
    lam_ = y0.size() ? sp_.scale_multipliers(y0) : least_squares_multipliers();
    const double th0 = theta(ev_.h);
    theta_max_ = 1e4 * std::max(1.0, th0);
    theta_min_ = 1e-4 * std::max(1.0, th0);
    log_header();

    for (int iter = 0;; ++iter) {
      if (iter > 0) sp_.derivatives(x_, gf_, J_);
      if (!gf_.allFinite() || first_nonfinite(Vector(J_.coeffs())) >= 0) {
        return finish(SolveStatus::kNumericalFailure, "non-finite derivatives");
      }
      const Errors err = errors();
      stat_ = err.dual;
      if (sp_.raw_violation(ev_.h) <= o_.tol_eq && err.dual <= o_.tol_stat && err.compl0 <= o_.tol_stat) {
        return finish(SolveStatus::kConverged, "converged");
      }
      if (iter >= o_.max_iterations) return finish(SolveStatus::kMaxIter, "iteration limit");
      if (elapsed() > o_.max_wall_seconds) return finish(SolveStatus::kMaxIter, "wall-time limit");

      // Monotone barrier update, possibly several times per iterate.
      for (Errors e = err; e.barrier(mu_) <= kKappaEps * mu_ && mu_ > mu_min_; e = errors()) {
        mu_ = std::max(mu_min_, std::min(kKappaMu * mu_, std::pow(mu_, kThetaMu)));
        tau_ = std::max(kTauMin, 1.0 - mu_);
        filter_.clear();
        ++result_.outer_iterations;
      }

      if (!factor_primal_dual()) {
        return finish(SolveStatus::kNumericalFailure, "KKT matrix could not be regularized");
      }
      const Vector gphi = barrier_gradient();
      Vector rhs(nz_ + m_);
      rhs.head(nz_) = -(gphi + J_.transpose() * lam_).cwiseProduct(free_);
      rhs.tail(m_) = -ev_.h;
      const Vector sol = kkt_.solve(rhs);
      if (!sol.allFinite()) return finish(SolveStatus::kNumericalFailure, "non-finite Newton step");
      const Vector dx = sol.head(nz_).cwiseProduct(free_);
      const Vector dlam = sol.tail(m_);

      Step step;
      if (!line_search(dx, gphi, rhs, step)) {
        filter_.emplace_back((1 - kGammaTheta) * theta(ev_.h), phi(x_, ev_.f) - kGammaPhi * theta(ev_.h));
        std::string why;
        if (!restore(why)) return finish(SolveStatus::kInfeasible, why);
        ++result_.inner_iterations;
        log_line(iter, 0.0, 0.0, 'r');
        continue;
      }
      if (!step.f_type) {
        const double th = theta(ev_.h);
        filter_.emplace_back((1 - kGammaTheta) * th, phi(x_, ev_.f) - kGammaPhi * th);
      }
      Vector dzl, dzu;
      bound_multiplier_step(step.dx, dzl, dzu);
      const double az = std::min(max_multiplier_step(zl_, dzl), max_multiplier_step(zu_, dzu));
      x_ = x_ + step.alpha * step.dx;
      ev_ = std::move(step.eval);
      lam_ += step.alpha * dlam;
      zl_ += az * dzl;
      zu_ += az * dzu;
      safeguard_bound_multipliers();
      if (m_ && lam_.cwiseAbs().maxCoeff() > kMaxMultiplier) {
        // A rank-deficient Jacobian lets the regularized system return
        // multipliers of order 1/delta_c; re-estimate them.
        sp_.derivatives(x_, gf_, J_);
        lam_ = least_squares_multipliers();
      }
      ++result_.inner_iterations;
      log_line(iter, step.alpha, az, step.soc ? 's' : (step.f_type ? 'f' : 'h'));
    }
  }

 private:
  struct Errors {
    double dual = 0, primal = 0, compl0 = 0, compl_mu_raw = 0, sc = 1;
    std::vector<double> products;
    double barrier(double mu) const {
      double c = 0;
      for (double v : products) c = std::max(c, std::abs(v - mu));
      return std::max({dual, primal, c / sc});
    }
  };
  struct Step {
    Vector dx;
    double alpha = 0;
    Eval eval;
    bool f_type = false, soc = false;
  };

  bool has_lo(int i) const { return !fixed_[i] && std::isfinite(lo_[i]); }
  bool has_hi(int i) const { return !fixed_[i] && std::isfinite(hi_[i]); }
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }
  static double theta(const Vector& h) { return h.lpNorm<1>(); }

  double phi(const Vector& x, double f) const {
    double v = f;
    for (int i = 0; i < nz_; ++i) {
      if (has_lo(i)) v -= mu_ * std::log(x[i] - lo_[i]);
      if (has_hi(i)) v -= mu_ * std::log(hi_[i] - x[i]);
    }
    return std::isnan(v) ? kInf : v;
  }

  Vector barrier_gradient() const {
    Vector g = gf_;
    for (int i = 0; i < nz_; ++i) {
      if (has_lo(i)) g[i] -= mu_ / (x_[i] - lo_[i]);
      if (has_hi(i)) g[i] += mu_ / (hi_[i] - x_[i]);
    }
    return g.cwiseProduct(free_);
  }

  Errors errors() const {
    Errors e;
    const Vector r = (gf_ + J_.transpose() * lam_ - zl_ + zu_).cwiseProduct(free_);
    double zsum = 0;
    int nb = 0;
    for (int i = 0; i < nz_; ++i) {
      if (has_lo(i)) {
        e.products.push_back((x_[i] - lo_[i]) * zl_[i]);
        zsum += zl_[i];
        ++nb;
      }
      if (has_hi(i)) {
        e.products.push_back((hi_[i] - x_[i]) * zu_[i]);
        zsum += zu_[i];
        ++nb;
      }
    }
    const double sd = std::max(kSMax, (lam_.lpNorm<1>() + zsum) / std::max(1, m_ + nb)) / kSMax;
    e.sc = nb ? std::max(kSMax, zsum / nb) / kSMax : 1.0;
    e.dual = (r.size() ? r.cwiseAbs().maxCoeff() : 0.0) / sd;
    e.primal = m_ ? ev_.h.cwiseAbs().maxCoeff() : 0.0;
    for (double v : e.products) e.compl0 = std::max(e.compl0, std::abs(v));
    e.compl0 /= e.sc;
    return e;
  }

  void center_bound_multipliers() {
    for (int i = 0; i < nz_; ++i) {
      zl_[i] = has_lo(i) ? mu_ / (x_[i] - lo_[i]) : 0.0;
      zu_[i] = has_hi(i) ? mu_ / (hi_[i] - x_[i]) : 0.0;
    }
  }

  void safeguard_bound_multipliers() {
    for (int i = 0; i < nz_; ++i) {
      if (has_lo(i)) {
        const double s = x_[i] - lo_[i];
        zl_[i] = std::clamp(zl_[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
      }
      if (has_hi(i)) {
        const double s = hi_[i] - x_[i];
        zu_[i] = std::clamp(zu_[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
      }
    }
  }

  Vector sigma() const {
    Vector s = Vector::Zero(nz_);
    for (int i = 0; i < nz_; ++i) {
      if (fixed_[i]) s[i] = 1.0;
      if (has_lo(i)) s[i] += zl_[i] / (x_[i] - lo_[i]);
      if (has_hi(i)) s[i] += zu_[i] / (hi_[i] - x_[i]);
    }
    return s;
  }

  SparseMatrix free_jacobian() const { return J_ * free_.asDiagonal(); }

  Vector least_squares_multipliers() {
    KktSystem ls;
    const SparseMatrix empty(nz_, nz_);
    if (!ls.factor(empty, Vector::Ones(nz_), free_jacobian(), kDeltaC)) return Vector::Zero(m_);
    Vector rhs = Vector::Zero(nz_ + m_);
    rhs.head(nz_) = -(gf_ - zl_ + zu_).cwiseProduct(free_);
    const Vector lam = ls.solve(rhs).tail(m_);
    if (!lam.allFinite() || (m_ && lam.cwiseAbs().maxCoeff() > 1e3)) return Vector::Zero(m_);
    return lam;
  }

  // Inertia correction: smallest delta_w making the reduced Hessian
  // positive definite on the constraint null space.
  bool factor_primal_dual() {
    SparseMatrix W = sp_.hessian(x_, lam_);
    W.conservativeResize(nz_, nz_);
    const SparseMatrix Wf = free_.asDiagonal() * W * free_.asDiagonal();
    const SparseMatrix Jf = free_jacobian();
    const Vector base = sigma();
    const double floor = std::max(o_.regularization_floor, 1e-20);
    double dw = 0.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Vector d = base + Vector::Constant(nz_, dw).cwiseProduct(free_);
      if (kkt_.factor(Wf, d, Jf, kDeltaC) && kkt_.inertia_ok()) {
        delta_w_ = dw;
        if (dw > 0) last_delta_w_ = dw;
        return true;
      }
      if (dw == 0.0) {
        dw = last_delta_w_ == 0.0 ? 1e-4 : std::max(floor, last_delta_w_ / 3.0);
      } else {
        dw *= last_delta_w_ == 0.0 ? 100.0 : 8.0;
      }
      if (dw > 1e40) break;
    }
    return false;
  }

  // Largest step keeping x strictly inside the relaxed bounds.
  double max_primal_step(const Vector& x, const Vector& dx) const {
    double a = 1.0;
    for (int i = 0; i < nz_; ++i) {
      if (dx[i] < 0 && has_lo(i)) a = std::min(a, -tau_ * (x[i] - lo_[i]) / dx[i]);
      if (dx[i] > 0 && has_hi(i)) a = std::min(a, tau_ * (hi_[i] - x[i]) / dx[i]);
    }
    return a;
  }
  double max_multiplier_step(const Vector& z, const Vector& dz) const {
    double a = 1.0;
    for (int i = 0; i < nz_; ++i)
      if (dz[i] < 0 && z[i] > 0) a = std::min(a, -tau_ * z[i] / dz[i]);
    return a;
  }

  void bound_multiplier_step(const Vector& dx, Vector& dzl, Vector& dzu) const {
    dzl = Vector::Zero(nz_);
    dzu = Vector::Zero(nz_);
    for (int i = 0; i < nz_; ++i) {
      if (has_lo(i)) {
        const double s = x_[i] - lo_[i];
        dzl[i] = mu_ / s - zl_[i] - zl_[i] / s * dx[i];
      }
      if (has_hi(i)) {
        const double s = hi_[i] - x_[i];
        dzu[i] = mu_ / s - zu_[i] + zu_[i] / s * dx[i];
      }
    }
  }

  bool filter_ok(double th, double ph) const {
    for (const auto& [ft, fp] : filter_)
      if (th >= ft && ph >= fp) return false;
    return true;
  }

  bool line_search(const Vector& dx, const Vector& gphi, const Vector& rhs, Step& out) {
    const double th = theta(ev_.h);
    const double ph = phi(x_, ev_.f);
    const double slope = gphi.dot(dx);
    const auto acceptable = [&](double a, const Eval& e, const Vector& xt, bool& f_type) {
      if (!e.finite) return false;
      const double tht = theta(e.h), pht = phi(xt, e.f);
      if (!std::isfinite(pht) || tht > theta_max_ || !filter_ok(tht, pht)) return false;
      const bool switching = slope < 0 && a * std::pow(-slope, kSPhi) > std::pow(th, kSTheta);
      if (th <= theta_min_ && switching) {
        f_type = true;
        return pht <= ph + kEtaPhi * a * slope;
      }
      f_type = false;
      return tht <= (1 - kGammaTheta) * th || pht <= ph - kGammaPhi * th;
    };

    double alpha_min = kGammaAlpha * kGammaTheta;
    if (slope < 0) {
      alpha_min = std::min(kGammaTheta, -kGammaPhi * th / slope);
      if (th <= theta_min_) alpha_min = std::min(alpha_min, std::pow(th, kSTheta) / std::pow(-slope, kSPhi));
      alpha_min *= kGammaAlpha;
    }

    const double alpha_max = max_primal_step(x_, dx);
    const double rel = (dx.cwiseAbs().array() / (1.0 + x_.cwiseAbs().array())).maxCoeff();
    const bool tiny = rel < 10 * std::numeric_limits<double>::epsilon();
    double alpha = alpha_max;
    for (int trial = 0; alpha >= alpha_min || tiny; ++trial) {
      const Vector xt = x_ + alpha * dx;
      Eval e = sp_.evaluate(xt);
      bool f_type = false;
      if (e.finite && (tiny || acceptable(alpha, e, xt, f_type))) {
        out = {dx, alpha, std::move(e), f_type, false};
        return true;
      }
      if (tiny) return false;
      if (trial == 0 && e.finite && theta(e.h) >= th) {
        // Second-order correction of the constraint linearization.
        Vector csoc = alpha * ev_.h + e.h;
        double th_old = theta(e.h);
        Vector r = rhs;
        for (int k = 0; k < kMaxSoc; ++k) {
          r.tail(m_) = -csoc;
          const Vector dxs = kkt_.solve(r).head(nz_).cwiseProduct(free_);
          const double as = max_primal_step(x_, dxs);
          const Vector xs = x_ + as * dxs;
          Eval es = sp_.evaluate(xs);
          if (!es.finite) break;
          bool fs = false;
          if (acceptable(as, es, xs, fs)) {
            out = {dxs, as, std::move(es), fs, true};
            return true;
          }
          const double ths = theta(es.h);
          if (ths > kKappaSoc * th_old) break;
          th_old = ths;
          csoc = as * csoc + es.h;
        }
      }
      alpha *= 0.5;
    }
    return false;
  }

  // Feasibility restoration: Gauss-Newton on 1/2 |h|^2 with a decaying
  // proximal term and the same bound barrier, until the filter accepts.
  bool restore(std::string& why) {
    const Vector xr = x_;
    const double th_r = theta(ev_.h);
    double zeta = std::sqrt(mu_);
    KktSystem rk;
    const SparseMatrix empty(nz_, nz_);
    for (int it = 0; it < 300; ++it) {
      if (elapsed() > o_.max_wall_seconds) {
        why = "wall-time limit in restoration";
        return false;
      }
      sp_.derivatives(x_, gf_, J_);
      Vector d(nz_), g(nz_);
      for (int i = 0; i < nz_; ++i) {
        d[i] = fixed_[i] ? 1.0 : zeta;
        g[i] = zeta * (x_[i] - xr[i]);
        if (has_lo(i)) {
          const double s = x_[i] - lo_[i];
          d[i] += mu_ / (s * s);
          g[i] -= mu_ / s;
        }
        if (has_hi(i)) {
          const double s = hi_[i] - x_[i];
          d[i] += mu_ / (s * s);
          g[i] += mu_ / s;
        }
      }
      g = g.cwiseProduct(free_);
      if (!rk.factor(empty, d, free_jacobian(), 1.0)) {
        why = "restoration system could not be factored";
        return false;
      }
      Vector rhs(nz_ + m_);
      rhs.head(nz_) = -g;
      rhs.tail(m_) = -ev_.h;
      const Vector dx = rk.solve(rhs).head(nz_).cwiseProduct(free_);
      const auto psi = [&](const Vector& x, const Vector& h) {
        double v = 0.5 * h.squaredNorm() + 0.5 * zeta * (x - xr).squaredNorm();
        for (int i = 0; i < nz_; ++i) {
          if (has_lo(i)) v -= mu_ * std::log(x[i] - lo_[i]);
          if (has_hi(i)) v -= mu_ * std::log(hi_[i] - x[i]);
        }
        return std::isnan(v) ? kInf : v;
      };
      const Vector jth = J_.transpose() * ev_.h;
      const double slope = (jth.cwiseProduct(free_) + g).dot(dx);
      const double psi0 = psi(x_, ev_.h);
      double a = max_primal_step(x_, dx);
      bool moved = false;
      for (int ls = 0; ls < 40 && slope < 0; ++ls, a *= 0.5) {
        const Vector xt = x_ + a * dx;
        Eval e = sp_.evaluate(xt);
        if (e.finite && psi(xt, e.h) <= psi0 + 1e-4 * a * slope) {
          x_ = xt;
          ev_ = std::move(e);
          moved = true;
          break;
        }
      }
      const double th = theta(ev_.h);
      if (moved && th <= 0.9 * th_r && th <= theta_max_ && filter_ok(th, phi(x_, ev_.f))) {
        sp_.derivatives(x_, gf_, J_);
        center_bound_multipliers();
        lam_ = least_squares_multipliers();
        return true;
      }
      const double stationarity = jth.cwiseProduct(free_).cwiseAbs().maxCoeff();
      if (!moved && zeta <= 1e-8) {
        why = "restoration stalled at residual " + std::to_string(sp_.raw_violation(ev_.h)) +
              " (feasibility gradient " + std::to_string(stationarity) + ")";
        return false;
      }
      zeta = std::max(1e-8, 0.5 * zeta);
    }
    why = "restoration iteration limit";
    return false;
  }

  SolveResult finish(SolveStatus status, std::string msg) {
    const Vector x = sp_.to_x(x_).cwiseMax(p_.variable_lower()).cwiseMin(p_.variable_upper());
    result_.status = status;
    result_.x = x;
    result_.objective = p_.objective(x);
    result_.multipliers = lam_.size() ? sp_.unscale_multipliers(lam_) : Vector::Zero(m_);
    result_.feasibility = max_violation(p_, x);
    result_.stationarity = stat_;
    result_.message = std::move(msg);
    result_.wall_seconds = elapsed();
    if (status == SolveStatus::kConverged && result_.feasibility > o_.tol_eq) {
      result_.status = SolveStatus::kMaxIter;
      result_.message = "residual check failed after unscaling";
    }
    return result_;
  }

  void log_header() const {
    if (!o_.log) return;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%5s %14s %9s %9s %6s %9s %7s %9s %9s\n", "iter", "objective", "inf_pr",
                  "inf_du", "lg(mu)", "|dx|", "lg(rg)", "alpha_du", "alpha_pr");
    *o_.log << buf;
  }
  void log_line(int iter, double ap, double az, char kind) const {
    if (!o_.log) return;
    const Errors e = errors();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%5d %14.7e %9.2e %9.2e %6.2f %9s %7s %9.2e %9.2e%c\n", iter, ev_.f,
                  sp_.raw_violation(ev_.h), e.dual, std::log10(mu_), "",
                  delta_w_ > 0 ? std::to_string(std::log10(delta_w_)).substr(0, 5).c_str() : "-", az, ap, kind);
    *o_.log << buf;
  }

  const NlpProblem& p_;
  const SolverOptions& o_;
  ScaledProblem sp_;
  int nz_, m_;
  Clock::time_point start_;
  Vector lo_, hi_, free_;
  std::vector<char> fixed_;
  Vector x_, lam_, zl_, zu_, gf_;
  SparseMatrix J_;
  Eval ev_;
  double mu_ = 0.1, mu_min_ = 1e-9, tau_ = 0.99;
  double theta_max_ = kInf, theta_min_ = 0;
  double delta_w_ = 0, last_delta_w_ = 0, stat_ = kInf;
  std::vector<std::pair<double, double>> filter_;
  KktSystem kkt_;
  SolveResult result_;
};

}  // namespace

SolveResult InteriorPointSolver::solve(const NlpProblem& problem, const Vector& x0, const SolverOptions& options,
                                       const Vector& y0) const {
  options.validate();
  const auto start = Clock::now();
  if (x0.size() != problem.num_variables()) throw UsageError("initial guess has the wrong dimension");
  if (y0.size() != 0 && y0.size() != problem.num_constraints())
    throw UsageError("initial multipliers have the wrong dimension");
  const Vector xstart = x0.cwiseMax(problem.variable_lower()).cwiseMin(problem.variable_upper());
  const int bad = first_nonfinite(problem.constraints(xstart));
  if (bad >= 0 || !std::isfinite(problem.objective(xstart))) {
    SolveResult r;
    r.status = SolveStatus::kNumericalFailure;
    r.x = xstart;
    r.multipliers = Vector::Zero(problem.num_constraints());
    r.failed_constraint = bad;
    r.feasibility = kInf;
    r.stationarity = kInf;
    r.message = bad >= 0 ? "non-finite constraint " + problem.constraint_name(bad) : "non-finite objective";
    return r;
  }
  return InteriorPoint(problem, options, xstart, start).run(y0);
}

}  // namespace hopper::nlp
