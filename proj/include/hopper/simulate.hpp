// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hopper/model.hpp"

namespace hopper {

/// Integration ran into the time cap without the phase event firing.
class NoEventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step size collapsed below the representable minimum.
class StiffnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-cubic Hermite input u(t) on [0, t_end]; C1 by construction.
/// Outside the knot span the end polynomials are extrapolated.
class InputSignal {
 public:
  InputSignal() = default;
  /// Knot times strictly increasing, values and derivatives per knot.
  InputSignal(std::vector<double> times, std::vector<Vec2> values, std::vector<Vec2> rates);

  static InputSignal constant(const Vec2& value, double duration);

  Vec2 value(double t) const;
  Vec2 rate(double t) const;
  double duration() const { return times_.empty() ? 0.0 : times_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec2>& values() const { return values_; }
  const std::vector<Vec2>& rates() const { return rates_; }

 private:
  std::size_t segment(double t) const;

  std::vector<double> times_;
  std::vector<Vec2> values_;
  std::vector<Vec2> rates_;
};

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double event_tol = 1e-10;   // |event(t*)| at the localized crossing
  double time_cap = 10.0;     // per phase
  double max_step = 0.05;
  /// Zero crossings before this time are ignored (the phase starts on its
  /// own event surface).
  double min_event_time = 1e-6;
  /// If set, integrate for exactly this long and skip event detection.
  std::optional<double> fixed_duration;
};

struct SimTrajectory {
  Phase phase = Phase::kStance;
  ContactContext context;
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Vec2> inputs;
  std::vector<Vec2> contact_forces;  // stance only
  double event_time = 0.0;
  double event_residual = 0.0;

  const State& final_state() const { return states.back(); }
};

/// Projects a stance state onto c(q) = 0 and W qdot = 0 (least squares).
State project_to_contact(const State& x, const ContactContext& ctx, const ModelParams& p);

/// Adaptive Dormand-Prince 5(4) integration of one phase until its event
/// (stance: lambda_y falls through zero, flight: foot height falls through
/// zero). Throws NoEventError / StiffnessError.
SimTrajectory integrate_phase(const State& x0, const InputSignal& u, double k_l, Phase phase,
                              const ContactContext& ctx, const ModelParams& p, const IntegratorOptions& opts = {});

struct StrideResult {
  SimTrajectory stance;
  SimTrajectory flight;
  State post_impact;
  double periodicity_residual = 0.0;
};

struct StrideOptions {
  IntegratorOptions integrator;
  /// Durations known in advance (re-integration of an optimized gait). When
  /// set, events closer than half the hint to the phase start are ignored.
  std::optional<double> stance_hint;
  std::optional<double> flight_hint;
  bool project_initial_state = true;
};

/// Stance until liftoff, flight until touchdown, then the impact map.
/// Residual: ||x(0) - S g(x(t_F))|| with S dropping the horizontal position.
StrideResult simulate_stride(const State& x0, const InputSignal& u_stance, const InputSignal& u_flight, double k_l,
                             const ModelParams& p, const StrideOptions& opts = {});

/// CSV columns: phase,t,x,y,phi,alpha,l,xd,yd,phid,alphad,ld,tau,f,lambda_x,lambda_y
void write_trajectory_csv(std::ostream& os, const std::vector<const SimTrajectory*>& phases);

}  // namespace hopper
