// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hopper/model.hpp"
#include "test_util.hpp"

using namespace hopper;
using hopper::testing::fd_jacobian;
using hopper::testing::random_input;
using hopper::testing::random_state;
using hopper::testing::rel_err;

namespace {

// Rolling constraint from the geometry: foot center plus rolled arc length.
Vec2 geometric_contact(const Vec5& q, double d0, double r_f) {
  const double theta = q[2] + q[3];
  const double foot_x = q[0] + q[4] * std::sin(theta);
  const double foot_y = q[1] - q[4] * std::cos(theta);
  return {foot_x + r_f * theta - d0, foot_y - r_f};
}

State consistent_stance_state(std::mt19937_64& rng, const ModelParams& p) {
  State x = random_state(rng);
  x.q[1] = x.q[4] * std::cos(x.q[2] + x.q[3]) + p.r_f;
  const Mat25 W = contact_jacobian(x.q, x.qdot, p).W;
  const Mat5 P = Mat5::Identity() - W.transpose() * (W * W.transpose()).inverse() * W;
  x.qdot = P * x.qdot;
  return x;
}

double total_energy(const State& x, double k_l, const ModelParams& p) {
  return kinetic_energy(x, p) + potential_energy(x, k_l, p);
}

}  // namespace

TEST_CASE("default parameters reproduce the reference robot") {
  const ModelParams p;
  CHECK(p.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.m_f == 0.05);
  CHECK(p.m_l == 0.1);
  CHECK(p.m_t == 0.85);
  CHECK(p.theta_t == 0.4);
  CHECK(p.k_alpha == 5.0);
  CHECK(p.xi_l == doctest::Approx(0.2 * std::sqrt(2.0)));
  CHECK_NOTHROW(p.validate());

  ModelParams bad;
  bad.m_f = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("model parameters parse from key-value text") {
  const auto p = ModelParams::parse("# comment\nk_alpha = 4.5\n r_f=0.04 # trailing\n");
  CHECK(p.k_alpha == 4.5);
  CHECK(p.r_f == 0.04);
  CHECK(p.m_t == 0.85);
  CHECK_THROWS_AS(ModelParams::parse("nonsense = 1"), ConfigError);
  CHECK_THROWS_AS(ModelParams::parse("m_f = abc"), ConfigError);
  CHECK_THROWS_AS(ModelParams::parse("m_f 3"), ConfigError);
  const auto round = ModelParams::parse(ModelParams{}.to_text());
  CHECK(round.to_map() == ModelParams{}.to_map());
}

TEST_CASE("damping coefficients") {
  const ModelParams p;
  auto zero = damping_coefficients(0.0, p);
  CHECK(zero.leg == 0.0);
  CHECK(zero.hip == doctest::Approx(0.26590).epsilon(1e-4));
  CHECK(damping_coefficients(4.44, p).leg == doctest::Approx(1.1618).epsilon(1e-4));

  ModelParams unit;
  unit.xi_l = 0.5;
  unit.m_t = 0.9;
  unit.m_l = 0.1;
  CHECK(damping_coefficients(1.0, unit).leg == doctest::Approx(1.0));
  CHECK_THROWS_AS(damping_coefficients(-1.0, p), DomainError);
}

TEST_CASE("contact constraints") {
  const ModelParams p;
  Vec5 q;
  q << 0.3, 1.05, 0, 0, 1;
  CHECK(contact_constraints(q, {0.3}, p).norm() < 1e-15);
  q << 0, 2, 0, 0, 1;
  CHECK(contact_constraints(q, {0.0}, p)[1] == doctest::Approx(0.95));

  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec5 qr = random_state(rng).q;
    const double d0 = 0.1 * i;
    CHECK((contact_constraints(qr, {d0}, p) - geometric_contact(qr, d0, p.r_f)).norm() < 1e-14);
  }
  // The touchdown context zeroes the horizontal constraint at its own configuration.
  const Vec5 qt = random_state(rng).q;
  CHECK(std::abs(contact_constraints(qt, ContactContext::at_touchdown(qt, p), p)[0]) < 1e-14);
}

TEST_CASE("contact Jacobian matches finite differences") {
  const ModelParams p;
  std::mt19937_64 rng(11);
  double worst_w = 0.0, worst_drift = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State x = random_state(rng);
    const auto cj = contact_jacobian(x.q, x.qdot, p);
    CHECK(cj.W(0, 0) == 1.0);
    CHECK(cj.W(1, 1) == 1.0);
    const auto c = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd { return contact_constraints(q, {0.2}, p); };
    worst_w = std::max(worst_w, rel_err(cj.W, fd_jacobian(c, x.q)));
    // Wdot qdot = d/ds [W(q + s qdot) qdot] at s = 0
    const auto wq = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
      const Vec5 qs = x.q + s[0] * x.qdot;
      return contact_jacobian(qs, x.qdot, p).W * x.qdot;
    };
    const Eigen::VectorXd s0 = Eigen::VectorXd::Zero(1);
    worst_drift = std::max(worst_drift, rel_err(cj.drift, fd_jacobian(wq, s0)));
  }
  CHECK(worst_w < 1e-6);
  CHECK(worst_drift < 1e-5);
}

TEST_CASE("mass matrix is symmetric positive definite") {
  const ModelParams p;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Mat5 M = mass_matrix(random_state(rng).q, p);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat5> eig(M);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
  ModelParams degenerate;
  degenerate.m_f = 1e-14;
  degenerate.theta_f = 1e-14;
  Vec5 q;
  q << 0, 1, 0, 0, 1;
  CHECK_THROWS_AS(mass_matrix(q, degenerate), ModelError);
}

TEST_CASE("bias forces at rest reduce to gravity and springs") {
  const ModelParams p;
  Vec5 q;
  q << 0.2, 1.0, 0.0, 0.0, 1.0;
  const Vec5 h = bias_forces(q, Vec5::Zero(), 3.0, p);
  CHECK(h[1] == doctest::Approx(-1.0));
  CHECK(h[0] == doctest::Approx(0.0));
  CHECK(h[4] == doctest::Approx(p.m_f));  // foot weight pulls the leg out
  const Mat52 B = input_matrix();
  CHECK(B(3, 0) == 1.0);
  CHECK(B(4, 1) == 1.0);
  CHECK(B.sum() == 2.0);
}

TEST_CASE("passive undamped flight conserves energy") {
  ModelParams p;
  p.xi_l = 0.0;
  p.xi_alpha = 0.0;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const State x0 = random_state(rng);
    const double k_l = 4.0;
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return flight_dynamics(State::from_stacked(x), {}, k_l, p);
    };
    const Vec10 x1 = hopper::testing::rk4(f, x0.stacked(), 1e-3, 500);
    const double e0 = total_energy(x0, k_l, p);
    const double e1 = total_energy(State::from_stacked(x1), k_l, p);
    CHECK(std::abs(e1 - e0) < 1e-6);
  }
}

TEST_CASE("flight center of mass falls with gravity for any input") {
  const ModelParams p;
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const State x0 = random_state(rng);
    const ControlInput u = random_input(rng);
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return flight_dynamics(State::from_stacked(x), u, 5.0, p);
    };
    const double h = 1e-3;
    const Vec10 xp = hopper::testing::rk4(f, x0.stacked(), h / 10, 10);
    const Vec10 xm = hopper::testing::rk4(f, x0.stacked(), -h / 10, 10);
    const Vec2 acc = (center_of_mass(xp.head<5>(), p) - 2.0 * center_of_mass(x0.q, p) +
                      center_of_mass(xm.head<5>(), p)) / (h * h);
    CHECK(acc[0] == doctest::Approx(0.0).epsilon(1e-5).scale(1.0));
    CHECK(acc[1] == doctest::Approx(-1.0).epsilon(1e-5));
  }
  // At rest with relaxed springs only gravity acts.
  State rest;
  rest.q << 0, 2, 0, 0, 1;
  ModelParams no_foot_pull = p;
  const Vec10 xdot = flight_dynamics(rest, {}, 5.0, no_foot_pull);
  CHECK(xdot[6] == doctest::Approx(-1.0));
  CHECK(std::abs(xdot[5]) < 1e-14);
  CHECK(std::abs(xdot[7]) < 1e-14);
}

TEST_CASE("stance dynamics satisfy the index-reduced constraint") {
  const ModelParams p;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const State x = consistent_stance_state(rng, p);
    const ControlInput u = random_input(rng);
    const auto sd = stance_dynamics(x, u, 4.0, p);
    const auto cj = contact_jacobian(x.q, x.qdot, p);
    const Vec5 qdd = sd.xdot.tail<5>();
    CHECK((cj.W * qdd + cj.drift).cwiseAbs().maxCoeff() < 1e-10);

    // Schur-complement route for the contact force.
    const Mat5 M = mass_matrix(x.q, p);
    const Vec5 rhs = bias_forces(x.q, x.qdot, 4.0, p) + input_matrix() * u.vec();
    const Mat5 Minv = M.inverse();
    const Eigen::Matrix2d S = cj.W * Minv * cj.W.transpose();
    const Vec2 lambda = -S.inverse() * (cj.drift + cj.W * Minv * rhs);
    CHECK((lambda - sd.lambda).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("static stand is an equilibrium supported by the ground") {
  const ModelParams p;
  const double k_l = 4.44;
  State x;
  const double l = p.l0 - (p.m_t + p.m_l) * p.g / k_l;
  x.q << 0.0, l + p.r_f, 0.0, 0.0, l;
  const auto sd = stance_dynamics(x, {}, k_l, p);
  CHECK(sd.xdot.tail<5>().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sd.lambda[1] == doctest::Approx(1.0));
  CHECK(std::abs(sd.lambda[0]) < 1e-12);
  CHECK(liftoff_event(x, {}, k_l, p) > 0.0);
}

TEST_CASE("stance energy balance: actuator work minus damping") {
  const ModelParams p;
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const State x0 = consistent_stance_state(rng, p);
    const ControlInput u = random_input(rng);
    const double k_l = 3.0;
    const auto damp = damping_coefficients(k_l, p);
    // Augmented state: [x; accumulated power]
    const auto f = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
      const State x = State::from_stacked(z.head<10>());
      Eigen::VectorXd out(11);
      out.head<10>() = stance_dynamics(x, u, k_l, p).xdot;
      out[10] = x.qdot.dot(input_matrix() * u.vec()) - damp.leg * x.qdot[4] * x.qdot[4] -
                damp.hip * x.qdot[3] * x.qdot[3];
      return out;
    };
    Eigen::VectorXd z0(11);
    z0 << x0.stacked(), 0.0;
    const Eigen::VectorXd z1 = hopper::testing::rk4(f, z0, 1e-3, 200);
    const double de = total_energy(State::from_stacked(z1.head<10>()), k_l, p) - total_energy(x0, k_l, p);
    CHECK(de == doctest::Approx(z1[10]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("dynamics Jacobians match finite differences") {
  const ModelParams p;
  std::mt19937_64 rng(23);
  double worst_s = 0.0, worst_f = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State x = random_state(rng);
    const ControlInput u = random_input(rng);
    const double k_l = 2.0 + 0.05 * i;
    Eigen::VectorXd z(13);
    z << x.stacked(), u.tau, u.force, k_l;
    const auto fs = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
      return stance_dynamics(State::from_stacked(zz.head<10>()), {zz[10], zz[11]}, zz[12], p).xdot;
    };
    const auto ff = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
      return flight_dynamics(State::from_stacked(zz.head<10>()), {zz[10], zz[11]}, zz[12], p);
    };
    worst_s = std::max(worst_s, rel_err(stance_dynamics_jacobian(x, u, k_l, p), fd_jacobian(fs, z)));
    worst_f = std::max(worst_f, rel_err(flight_dynamics_jacobian(x, u, k_l, p), fd_jacobian(ff, z)));
  }
  CHECK(worst_s < 1e-5);
  CHECK(worst_f < 1e-5);
}

TEST_CASE("impact map") {
  const ModelParams p;
  std::mt19937_64 rng(29);

  SUBCASE("velocity already compatible with contact is unchanged") {
    const State x = consistent_stance_state(rng, p);
    const auto res = impact_map(x, p);
    CHECK((res.post.qdot - x.qdot).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.impulse.norm() < 1e-12);
  }

  SUBCASE("random impacts are dissipative and contact-compatible") {
    for (int i = 0; i < 1000; ++i) {
      State x = random_state(rng);
      x.q[1] = x.q[4] * std::cos(x.q[2] + x.q[3]) + p.r_f;
      const auto res = impact_map(x, p);
      const auto cj = contact_jacobian(x.q, res.post.qdot, p);
      CHECK((cj.W * res.post.qdot).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(kinetic_energy(res.post, p) <= kinetic_energy(x, p) + 1e-14);
      CHECK(res.post.q == x.q);
    }
  }

  SUBCASE("vertical drop matches the two-mass reduction") {
    // Upper body (torso + upper leg) and foot are linked only by the spring,
    // so the impulse stops the foot and leaves the upper body untouched.
    State x;
    x.q << 0.0, 1.0 + p.r_f, 0.0, 0.0, 1.0;
    x.qdot << 0.0, -0.8, 0.0, 0.0, 0.0;
    const auto res = impact_map(x, p);
    CHECK(res.post.qdot[1] == doctest::Approx(-0.8));
    CHECK(res.post.qdot[4] == doctest::Approx(-0.8));
    CHECK(std::abs(res.post.qdot[0]) < 1e-14);
    CHECK(std::abs(res.post.qdot[2]) < 1e-14);
    CHECK(std::abs(res.post.qdot[3]) < 1e-14);
    const double lost = kinetic_energy(x, p) - kinetic_energy(res.post, p);
    CHECK(lost == doctest::Approx(0.5 * p.m_f * 0.64));
  }
}

TEST_CASE("events and running cost") {
  const ModelParams p;
  State x;
  x.q << 3.0, 1.0 + p.r_f, 0.0, 0.0, 1.0;
  CHECK(std::abs(touchdown_event(x, p)) < 1e-15);
  x.q[1] = 2.0;
  CHECK(touchdown_event(x, p) == doctest::Approx(0.95));

  CHECK(running_cost({0.0, 0.0}, p) == 0.0);
  CHECK(running_cost({1.0, 0.0}, p) == 1.0);
  CHECK(running_cost({2.0, 3.0}, p) == 13.0);
}
