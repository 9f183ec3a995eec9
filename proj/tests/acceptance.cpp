// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status 1 if any criterion fails.
//
//   acceptance [--work DIR] [--only 1,2,...]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "hopper/csv.hpp"
#include "hopper/explorer.hpp"
#include "hopper/params.hpp"
#include "test_util.hpp"

using namespace hopper;
using hopper::testing::fd_jacobian;
using hopper::testing::random_decision;
using hopper::testing::random_input;
using hopper::testing::random_state;
using hopper::testing::rel_err;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome derivatives() {
  const ModelParams p;
  std::mt19937_64 rng(101);
  double dyn = 0.0, contact = 0.0, grad = 0.0, jac = 0.0, hess = 0.0;
  int misses = 0;
  for (int i = 0; i < 100; ++i) {
    const State x = random_state(rng);
    const ControlInput u = random_input(rng);
    const double k = 1.0 + 0.1 * i;
    Eigen::VectorXd z(13);
    z << x.stacked(), u.tau, u.force, k;
    const auto fs = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
      return stance_dynamics(State::from_stacked(zz.head<10>()), {zz[10], zz[11]}, zz[12], p).xdot;
    };
    const auto ff = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
      return flight_dynamics(State::from_stacked(zz.head<10>()), {zz[10], zz[11]}, zz[12], p);
    };
    dyn = std::max({dyn, rel_err(stance_dynamics_jacobian(x, u, k, p), fd_jacobian(fs, z)),
                    rel_err(flight_dynamics_jacobian(x, u, k, p), fd_jacobian(ff, z))});

    const ContactContext ctx{0.3};
    const auto fc = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      return contact_constraints(q, ctx, p);
    };
    contact = std::max(contact, rel_err(contact_jacobian(x.q, x.qdot, p).W, fd_jacobian(fc, x.q)));

    const StiffnessMode mode = i % 2 ? StiffnessMode::fixed(k) : StiffnessMode::free();
    const GaitNlp nlp(0.5 + 0.01 * i, mode, 2, BoundsConfig{}, p);
    const nlp::Vector a = random_decision(nlp.layout(), rng);
    nlp::Vector y(nlp.num_constraints());
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int r = 0; r < y.size(); ++r) y[r] = unit(rng);
    const auto rep = nlp::check_derivatives(nlp, a, 1e-6, y);
    grad = std::max(grad, rep.objective_gradient_error);
    jac = std::max(jac, rep.jacobian_error);
    hess = std::max(hess, rep.hessian_error);
    misses += rep.pattern_misses;
  }
  const double worst = std::max({dyn, contact, grad, jac, hess});
  return {worst < 1e-5 && misses == 0,
          "max rel. error dynamics " + num(dyn) + ", contact " + num(contact) + ", NLP gradient " + num(grad) +
              ", Jacobian " + num(jac) + ", Hessian " + num(hess) + ", pattern misses " + std::to_string(misses) +
              " (limit 1e-5, 100 points)"};
}

Outcome impacts() {
  const ModelParams p;
  std::mt19937_64 rng(202);
  double worst_w = 0.0, worst_gain = -1e300;
  int bad_equality = 0;
  for (int i = 0; i < 1000; ++i) {
    State x = random_state(rng);
    x.q[kY] = x.q[kLeg] * std::cos(x.q[kPhi] + x.q[kAlpha]) + p.r_f;  // foot on the ground
    const ImpactResult r = impact_map(x, p);
    const Mat25 W = contact_jacobian(x.q, x.qdot, p).W;
    worst_w = std::max(worst_w, (W * r.post.qdot).cwiseAbs().maxCoeff());
    const double t_minus = kinetic_energy(x, p), t_plus = kinetic_energy(r.post, p);
    worst_gain = std::max(worst_gain, (t_plus - t_minus) / t_minus);
    // Energy is conserved only when the pre-impact velocity is already admissible.
    if (std::abs(t_plus - t_minus) <= 1e-14 * t_minus && (W * x.qdot).norm() > 1e-6) ++bad_equality;
  }
  return {worst_w < 1e-10 && worst_gain <= 1e-14 && bad_equality == 0,
          "max |W qdot+| " + num(worst_w) + " (limit 1e-10), max (T+ - T-)/T- " + num(worst_gain) +
              ", lossless impacts with W qdot- != 0: " + std::to_string(bad_equality) + " (1000 states)"};
}

// Cubic path per lifted component.
struct Cubic {
  std::array<std::array<double, 4>, node::kLifted> c{};
  double value(int r, double t) const { return c[r][0] + t * (c[r][1] + t * (c[r][2] + t * c[r][3])); }
  double slope(int r, double t) const { return c[r][1] + t * (2 * c[r][2] + 3 * t * c[r][3]); }
};

Outcome unit_properties() {
  const ModelParams p;
  // Simpson on a cubic running cost w(t), realised via tau = sqrt(w / K_tau).
  const double k_tau = 1.0 / (p.total_mass() * std::sqrt(p.g * p.l0 * p.l0 * p.l0));
  const auto w = [](double t) { return 1.5 + 0.7 * t - 1.2 * t * t + 0.9 * t * t * t; };
  const auto W = [](double t) { return 1.5 * t + 0.35 * t * t - 0.4 * t * t * t + 0.225 * t * t * t * t; };
  double simpson = 0.0;
  for (int n : {1, 2, 5, 9}) {
    const double h = 1.7 / n;
    std::vector<NodeVector> nodes;
    for (int j = 0; j <= 2 * n; ++j) {
      NodeVector nd = NodeVector::Zero();
      nd[node::kU] = std::sqrt(w(0.5 * h * j) / k_tau);
      nd[node::kDt] = h;
      nodes.push_back(nd);
    }
    simpson = std::max(simpson, std::abs(simpson_cost(nodes, p) - W(1.7)));
  }

  // Hermite defects on random cubics.
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double hermite = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Cubic path;
    for (auto& row : path.c)
      for (auto& coef : row) coef = unit(rng);
    const double t0 = unit(rng), h = 0.05 + 0.2 * (unit(rng) + 1.0);
    const double k = 3.0 + unit(rng);
    const auto node_at = [&](double t, double v) {
      NodeVector nd = NodeVector::Zero();
      for (int r = 0; r < 12; ++r) nd[r] = path.value(r, t);
      nd[node::kDt] = h;
      nd[node::kK] = k;
      nd[node::kV] = v;
      nd[node::kV + 1] = -v;
      return nd;
    };
    const auto slope_at = [&](double t) {
      Lifted f = Lifted::Zero();
      for (int r = 0; r < 12; ++r) f[r] = path.slope(r, t);
      return f;
    };
    const double va = unit(rng), vb = unit(rng);
    const auto r = hermite_defect_blocks(node_at(t0, va), node_at(t0 + h / 2, 0.5 * (va + vb)), node_at(t0 + h, vb),
                                         slope_at(t0), slope_at(t0 + h / 2), slope_at(t0 + h));
    hermite = std::max(hermite, r.cwiseAbs().maxCoeff());
  }

  // Pseudo-state rows: zero for constant dt and k_l, proportional to any jump.
  StrideLayout L{2};
  nlp::Vector d = random_decision(L, rng);
  for (int j = 0; j < L.nodes_per_phase(); ++j) {
    d[L.offset(Phase::kStance, j) + node::kDt] = 0.12;
    d[L.offset(Phase::kStance, j) + node::kK] = 5.0;
  }
  const auto defects = [&](const nlp::Vector& x) {
    return hermite_defects(L.node(x, Phase::kStance, 0), L.node(x, Phase::kStance, 1), L.node(x, Phase::kStance, 2),
                           Phase::kStance, p);
  };
  const auto r0 = defects(d);
  bool pseudo = r0[12] == 0.0 && r0[13] == 0.0 && r0[26] == 0.0 && r0[27] == 0.0;
  nlp::Vector bumped = d;
  bumped[L.offset(Phase::kStance, 1) + node::kK] += 0.25;
  pseudo = pseudo && std::abs(defects(bumped)[13] - 0.25) < 1e-15;
  bumped = d;
  bumped[L.offset(Phase::kStance, 1) + node::kDt] += 0.01;
  pseudo = pseudo && std::abs(defects(bumped)[12] - 0.01) < 1e-15;

  return {simpson < 1e-12 && hermite < 1e-12 && pseudo,
          "Simpson error on cubic " + num(simpson) + " (limit 1e-12), Hermite defect on cubics " + num(hermite) +
              ", pseudo-state rows " + (pseudo ? "exact" : "NOT exact")};
}

std::string snapshot(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    std::ifstream is(f, std::ios::binary);
    out += std::filesystem::relative(f, dir).string() + "\n" + std::string(std::istreambuf_iterator<char>(is), {});
  }
  return out;
}

Outcome determinism(const std::filesystem::path& work) {
  const ModelParams p;
  WarmStartOptions wo;
  wo.n_seeds = 2;
  wo.segments = 10;
  wo.rng_seed = 7;
  const WarmStartResult a = warm_start(1.0, wo, p), b = warm_start(1.0, wo, p);
  bool same_ws = a.best.to_json() == b.best.to_json() && a.converged.size() == b.converged.size();
  for (std::size_t i = 0; same_ws && i < a.converged.size(); ++i)
    same_ws = a.converged[i].to_json() == b.converged[i].to_json();

  const GaitNlp nlp(0.8, StiffnessMode::fixed(5.0), 10, BoundsConfig{}, p);
  const nlp::Vector x0 = resample(a.best, 10, p);
  const auto s1 = nlp::solve(nlp, x0), s2 = nlp::solve(nlp, x0);
  const bool same_solve = s1.x == s2.x && s1.multipliers == s2.multipliers && s1.inner_iterations == s2.inner_iterations;

  const GridSpec spec{3.0, 4.5, 0.5, 0.9, 1.1, 0.1};
  ExploreOptions eo;
  eo.segments = 10;
  std::vector<std::string> snaps;
  for (int run = 0; run < 3; ++run) {
    const auto dir = work / ("determinism_" + std::to_string(run));
    std::filesystem::remove_all(dir);
    eo.directory = dir;
    eo.threads = run == 2 ? 2 : 1;
    explore_grid(a.best, spec, p, eo);
    snaps.push_back(snapshot(dir));
  }
  const bool same_map = snaps[0] == snaps[1] && snaps[0] == snaps[2];
  return {same_ws && same_solve && same_map,
          std::string("warm start ") + (same_ws ? "identical" : "DIFFERS") + ", solve " +
              (same_solve ? "identical" : "DIFFERS") + ", 4x3 map (1, 1 and 2 threads) " +
              (same_map ? "identical" : "DIFFERS")};
}

Outcome reproduction(const WarmStartResult& ws, double secs) {
  const Gait& g = ws.best;
  const bool k_ok = g.k_l >= 3.9 && g.k_l <= 5.0;
  const bool ts_ok = g.t_stance >= 1.1 && g.t_stance <= 1.5;
  const bool tf_ok = g.t_flight >= 0.9 && g.t_flight <= 1.3;
  int converged = 0;
  for (const auto& s : ws.seeds) converged += s.converged;
  return {g.status == nlp::SolveStatus::kConverged && g.free_stiffness && k_ok && ts_ok && tf_ok && secs < 600,
          "k* " + num(g.k_l) + (k_ok ? "" : " (outside [3.9, 5.0])") + ", tS " + num(g.t_stance) +
              (ts_ok ? "" : " (outside [1.1, 1.5])") + ", tF " + num(g.t_flight) +
              (tf_ok ? "" : " (outside [0.9, 1.3])") + ", CoT " + num(g.cot) + ", " + std::to_string(converged) + "/" +
              std::to_string(ws.seeds.size()) + " seeds converged, N=" + std::to_string(g.segments) + ", " +
              num(secs, "%.0f") + " s (budget 600 s)"};
}

Outcome fidelity(const Gait& g0, const std::filesystem::path& work) {
  const ModelParams p;
  const auto t0 = std::chrono::steady_clock::now();
  nlp::Vector a = resample(g0, 30, p);
  const StrideLayout L{30};
  std::optional<Gait> g;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(4.44 - g0.k_l) / 0.5)));
  for (int i = 1; i <= steps; ++i) {
    const double k = i == steps ? 4.44 : g0.k_l + (4.44 - g0.k_l) * i / steps;
    for (Phase ph : {Phase::kStance, Phase::kFlight})
      for (int j = 0; j < L.nodes_per_phase(); ++j) a[L.offset(ph, j) + node::kK] = k;
    const GaitNlp nlp(1.0, StiffnessMode::fixed(k), 30, BoundsConfig{}, p);
    const auto r = nlp::solve(nlp, a);
    if (!r.converged()) return {false, "fixed-stiffness solve failed at k = " + num(k) + ": " + r.message};
    a = r.x;
    if (i == steps) g = make_gait(nlp, r, "acceptance");
  }
  g->save(work / "gait_v1_k4.44.json");
  const ReintegrationReport rep = reintegrate(*g, p);
  const double secs = seconds_since(t0);
  return {rep.terminal_error < 1e-3 && rep.periodicity_residual < 2e-3 && secs < 60,
          "terminal deviation " + num(rep.terminal_error) + " (limit 1e-3), periodicity residual " +
              num(rep.periodicity_residual) + " (limit 2e-3), CoT " + num(g->cot) + ", " + num(secs, "%.1f") +
              " s (budget 60 s)"};
}

Outcome desk_study(const Gait& g0, const std::filesystem::path& work) {
  const ModelParams p;
  const auto dir = work / "desk_map";
  std::filesystem::remove_all(dir);
  ExploreOptions eo;
  eo.segments = 20;
  eo.directory = dir;
  eo.log = &std::cerr;
  const auto t0 = std::chrono::steady_clock::now();
  const GaitMap map = explore_grid(g0, GridSpec::desk(), p, eo);
  const double secs = seconds_since(t0);
  const Families f = extract_families(map);
  for (const auto& w : f.warnings) std::cerr << "  warning: " << w << "\n";

  CsvTable t;
  t.columns = {"v", "k_A", "CoT_A", "CoT_C", "penalty"};
  for (const auto& r : f.rows) t.add({r.v, r.k_a, r.cot_a, r.cot_c, r.penalty});
  std::ofstream(work / "desk_families.csv") << t.to_string();

  const double rho = spearman(f.a_speeds, f.a_stiffness);
  const bool a_ok = rho < -0.3;
  const bool b_ok = f.max_penalty >= 0.10 && f.max_penalty <= 0.30 && f.argmax_speed >= 0.2 - 1e-9 &&
                    f.argmax_speed <= 0.45;
  const bool c_ok = f.mean_penalty >= 0.03 && f.mean_penalty <= 0.10;
  double low = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (const auto& r : f.rows)
    if (r.v >= 0.6 - 1e-9 && r.v <= 0.8 + 1e-9) low = std::min(low, r.penalty);
  const bool d_ok = low < 0.03;
  bool order_ok = true;
  for (const auto& r : f.rows) order_ok = order_ok && r.cot_c >= r.cot_a;
  // Low-speed slice: soft legs cost more.
  const int iv = map.spec.nearest_v(0.3);
  const auto& soft = map.at(iv, map.spec.nearest_k(2.0));
  const auto& stiff = map.at(iv, map.spec.nearest_k(6.0));
  monotone = soft && stiff && soft->cot > stiff->cot;
  const auto mark = [](bool ok) { return std::string(ok ? "" : " FAIL"); };
  return {a_ok && b_ok && c_ok && d_ok && order_ok && secs < 1800,
          std::to_string(map.solved_count()) + "/" + std::to_string(map.cells.size()) + " cells, k_bar " +
              num(f.k_bar) + "; (a) spearman " + num(rho) + mark(a_ok) + "; (b) max penalty " +
              num(100 * f.max_penalty, "%.1f") + "% at v " + num(f.argmax_speed) + mark(b_ok) + "; (c) mean " +
              num(100 * f.mean_penalty, "%.2f") + "%" + mark(c_ok) + "; (d) min penalty on [0.6, 0.8] " +
              num(100 * low, "%.2f") + "%" + mark(d_ok) + "; CoT_C >= CoT_A " + (order_ok ? "holds" : "VIOLATED") +
              "; CoT(0.3, k=2) > CoT(0.3, k=6) " + (monotone ? "holds" : "does not hold") + "; " +
              num(secs, "%.0f") + " s (budget 1800 s)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path work = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--work") && i + 1 < argc) {
      work = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  std::filesystem::create_directories(work);
  const auto want = [&](int c) { return only.empty() || only.count(c); };

  int failures = 0;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail << std::endl;
  };

  if (want(1)) report(1, "derivatives vs finite differences", derivatives);
  if (want(2)) report(2, "impact map", impacts);
  if (want(6)) report(6, "quadrature and collocation properties", unit_properties);
  if (want(7)) report(7, "determinism", [&] { return determinism(work); });

  if (want(3) || want(4) || want(5)) {
    // Criterion 4's warm start seeds criteria 3 and 5.
    WarmStartOptions wo;
    wo.n_seeds = 10;
    wo.segments = 20;
    wo.rng_seed = 1;
    wo.log = &std::cerr;
    std::optional<WarmStartResult> ws;
    double ws_secs = 0.0;
    std::string ws_error;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      ws = warm_start(1.0, wo, ModelParams{});
      ws_secs = seconds_since(t0);
      ws->best.save(work / "g0.json");
    } catch (const std::exception& e) {
      ws_error = e.what();
    }
    const auto need_g0 = [&](const std::function<Outcome(const Gait&)>& fn) {
      return [&, fn] { return ws ? fn(ws->best) : Outcome{false, "no warm-start gait: " + ws_error}; };
    };
    if (want(4))
      report(4, "g0 reproduction", [&] {
        return ws ? reproduction(*ws, ws_secs) : Outcome{false, "warm start failed: " + ws_error};
      });
    if (want(3)) report(3, "collocation fidelity", need_g0([&](const Gait& g) { return fidelity(g, work); }));
    if (want(5)) report(5, "desk-scale parametric study", need_g0([&](const Gait& g) { return desk_study(g, work); }));
  }
  return failures ? 1 : 0;
}
