// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>

namespace hopper {

// ---------------------------------------------------------------------------
// InputSignal

InputSignal::InputSignal(std::vector<double> times, std::vector<Vec2> values, std::vector<Vec2> rates)
    : times_(std::move(times)), values_(std::move(values)), rates_(std::move(rates)) {
  if (times_.size() < 2 || values_.size() != times_.size() || rates_.size() != times_.size()) {
    throw std::invalid_argument("InputSignal needs >= 2 knots with matching values and rates");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("InputSignal knot times must increase");
  }
}

InputSignal InputSignal::constant(const Vec2& value, double duration) {
  return InputSignal({0.0, duration}, {value, value}, {Vec2::Zero(), Vec2::Zero()});
}

std::size_t InputSignal::segment(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times_.begin(), 1)) - 1;
  return std::min(idx, times_.size() - 2);
}

Vec2 InputSignal::value(double t) const {
  if (times_.empty()) return Vec2::Zero();
  const std::size_t i = segment(t);
  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * h * rates_[i] + (-2 * s3 + 3 * s2) * values_[i + 1] +
         (s3 - s2) * h * rates_[i + 1];
}

Vec2 InputSignal::rate(double t) const {
  if (times_.empty()) return Vec2::Zero();
  const std::size_t i = segment(t);
  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * values_[i] + (3 * s2 - 4 * s + 1) * h * rates_[i] + (-6 * s2 + 6 * s) * values_[i + 1] +
          (3 * s2 - 2 * s) * h * rates_[i + 1]) /
         h;
}

// ---------------------------------------------------------------------------
// Integration

namespace {

struct PhaseSystem {
  Phase phase;
  const InputSignal& u;
  double k_l;
  const ModelParams& p;

  Vec10 rhs(double t, const Vec10& x) const {
    const State s = State::from_stacked(x);
    const Vec2 uu = u.value(t);
    if (phase == Phase::kStance) return stance_dynamics(s, {uu[0], uu[1]}, k_l, p).xdot;
    return flight_dynamics(s, {uu[0], uu[1]}, k_l, p);
  }

  double event(double t, const Vec10& x) const {
    const State s = State::from_stacked(x);
    if (phase == Phase::kStance) {
      const Vec2 uu = u.value(t);
      return liftoff_event(s, {uu[0], uu[1]}, k_l, p);
    }
    return touchdown_event(s, p);
  }
};

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct StepResult {
  Vec10 x;
  Vec10 err;
};

StepResult dopri_step(const PhaseSystem& sys, double t, const Vec10& x, double h) {
  const Vec10 k1 = sys.rhs(t, x);
  const Vec10 k2 = sys.rhs(t + c2 * h, x + h * a21 * k1);
  const Vec10 k3 = sys.rhs(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
  const Vec10 k4 = sys.rhs(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vec10 k5 = sys.rhs(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vec10 k6 = sys.rhs(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  StepResult r;
  r.x = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Vec10 k7 = sys.rhs(t + h, r.x);
  r.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return r;
}

// Locates the zero of event(step(x_a, tau)) on (0, h] with Illinois regula falsi.
double locate_event(const PhaseSystem& sys, double t_a, const Vec10& x_a, double e_a, double h, double e_b,
                    double tol, Vec10& x_event, double& residual) {
  double lo = 0.0, hi = h, f_lo = e_a, f_hi = e_b;
  int side = 0;
  double tau = h;
  residual = e_b;
  x_event = dopri_step(sys, t_a, x_a, h).x;
  for (int it = 0; it < 200; ++it) {
    tau = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(tau > lo && tau < hi)) tau = 0.5 * (lo + hi);
    x_event = dopri_step(sys, t_a, x_a, tau).x;
    const double f = sys.event(t_a + tau, x_event);
    residual = f;
    if (std::abs(f) <= tol || hi - lo < 1e-15 * std::max(1.0, t_a)) break;
    if ((f > 0.0) == (f_lo > 0.0)) {
      lo = tau;
      f_lo = f;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = tau;
      f_hi = f;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  return tau;
}

void record(SimTrajectory& traj, const PhaseSystem& sys, double t, const Vec10& x) {
  const State s = State::from_stacked(x);
  const Vec2 uu = sys.u.value(t);
  traj.times.push_back(t);
  traj.states.push_back(s);
  traj.inputs.push_back(uu);
  if (sys.phase == Phase::kStance) {
    traj.contact_forces.push_back(stance_dynamics(s, {uu[0], uu[1]}, sys.k_l, sys.p).lambda);
  } else {
    traj.contact_forces.push_back(Vec2::Zero());
  }
}

}  // namespace

State project_to_contact(const State& x, const ContactContext& ctx, const ModelParams& p) {
  State out = x;
  for (int it = 0; it < 50; ++it) {
    const Vec2 c = contact_constraints(out.q, ctx, p);
    if (c.cwiseAbs().maxCoeff() < 1e-15) break;
    const Mat25 W = contact_jacobian(out.q, out.qdot, p).W;
    out.q -= W.transpose() * (W * W.transpose()).ldlt().solve(c);
  }
  const Mat25 W = contact_jacobian(out.q, out.qdot, p).W;
  out.qdot -= W.transpose() * (W * W.transpose()).ldlt().solve(W * out.qdot);
  return out;
}

SimTrajectory integrate_phase(const State& x0, const InputSignal& u, double k_l, Phase phase,
                              const ContactContext& ctx, const ModelParams& p, const IntegratorOptions& opts) {
  const PhaseSystem sys{phase, u, k_l, p};
  SimTrajectory traj;
  traj.phase = phase;
  traj.context = ctx;

  const double t_end = opts.fixed_duration.value_or(opts.time_cap);
  double t = 0.0;
  Vec10 x = x0.stacked();
  record(traj, sys, t, x);
  double e_prev = opts.fixed_duration ? 0.0 : sys.event(t, x);
  double h = std::min(opts.max_step, 1e-3);
  const double h_min = 1e-14;

  while (t < t_end) {
    h = std::min({h, opts.max_step, t_end - t});
    if (h < h_min) {
      if (t_end - t < h_min) break;
      throw StiffnessError(std::string("step size underflow in ") + to_string(phase) + " at t=" + std::to_string(t));
    }
    StepResult step = dopri_step(sys, t, x, h);
    double err = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(x[i]), std::abs(step.x[i]));
      err = std::max(err, std::abs(step.err[i]) / sc);
    }
    if (!std::isfinite(err)) {
      h *= 0.25;
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }
    if (!opts.fixed_duration) {
      const double e_new = sys.event(t + h, step.x);
      const bool armed = t + h > opts.min_event_time;
      if (armed && e_prev > 0.0 && e_new <= 0.0) {
        // Restrict the bracket to times past min_event_time.
        double t_a = t;
        Vec10 x_a = x;
        double e_a = e_prev;
        if (t_a < opts.min_event_time) {
          const double skip = opts.min_event_time - t_a;
          x_a = dopri_step(sys, t_a, x_a, skip).x;
          t_a = opts.min_event_time;
          e_a = sys.event(t_a, x_a);
        }
        if (e_a > 0.0) {
          Vec10 x_event;
          double residual = 0.0;
          const double tau = locate_event(sys, t_a, x_a, e_a, t + h - t_a, e_new, opts.event_tol, x_event, residual);
          traj.event_time = t_a + tau;
          traj.event_residual = residual;
          record(traj, sys, traj.event_time, x_event);
          return traj;
        }
      }
      e_prev = e_new;
    }
    t += h;
    x = step.x;
    record(traj, sys, t, x);
    h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
  }
  if (opts.fixed_duration) {
    traj.event_time = t;
    traj.event_residual = sys.event(t, x);
    return traj;
  }
  throw NoEventError(std::string("no ") + (phase == Phase::kStance ? "liftoff" : "touchdown") +
                     " event within the time cap");
}

StrideResult simulate_stride(const State& x0, const InputSignal& u_stance, const InputSignal& u_flight, double k_l,
                             const ModelParams& p, const StrideOptions& opts) {
  StrideResult out;
  const ContactContext ctx = ContactContext::at_touchdown(x0.q, p);
  const State start = opts.project_initial_state ? project_to_contact(x0, ctx, p) : x0;

  IntegratorOptions stance_opts = opts.integrator;
  if (opts.stance_hint) stance_opts.min_event_time = std::max(stance_opts.min_event_time, 0.5 * *opts.stance_hint);
  out.stance = integrate_phase(start, u_stance, k_l, Phase::kStance, ctx, p, stance_opts);

  IntegratorOptions flight_opts = opts.integrator;
  if (opts.flight_hint) flight_opts.min_event_time = std::max(flight_opts.min_event_time, 0.5 * *opts.flight_hint);
  out.flight = integrate_phase(out.stance.final_state(), u_flight, k_l, Phase::kFlight, ctx, p, flight_opts);

  out.post_impact = impact_map(out.flight.final_state(), p).post;
  Vec10 target = out.post_impact.stacked();
  target[0] = 0.0;
  out.periodicity_residual = (x0.stacked() - target).norm();
  return out;
}

void write_trajectory_csv(std::ostream& os, const std::vector<const SimTrajectory*>& phases) {
  os << "phase,t,x,y,phi,alpha,l,xd,yd,phid,alphad,ld,tau,f,lambda_x,lambda_y\n";
  os.precision(12);
  double offset = 0.0;
  for (const SimTrajectory* traj : phases) {
    for (std::size_t i = 0; i < traj->times.size(); ++i) {
      os << to_string(traj->phase) << ',' << offset + traj->times[i];
      const Vec10 x = traj->states[i].stacked();
      for (int j = 0; j < 10; ++j) os << ',' << x[j];
      os << ',' << traj->inputs[i][0] << ',' << traj->inputs[i][1];
      os << ',' << traj->contact_forces[i][0] << ',' << traj->contact_forces[i][1] << '\n';
    }
    if (!traj->times.empty()) offset += traj->times.back();
  }
}

}  // namespace hopper
