// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hopper/csv.hpp"
#include "hopper/explorer.hpp"
#include "hopper/params.hpp"

using namespace hopper;

namespace {

// One-seed warm start at N=10: a cheap converged gait shared by the tests.
const Gait& small_gait() {
  static const Gait g = [] {
    WarmStartOptions o;
    o.n_seeds = 1;
    o.segments = 10;
    return warm_start(1.0, o, ModelParams{}).best;
  }();
  return g;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hopper_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

// Synthetic map with prescribed CoT values (NaN: unsolved).
GaitMap synthetic_map(const GridSpec& spec, const std::vector<std::vector<double>>& cot) {
  GaitMap m(spec, 2);
  for (int iv = 0; iv < spec.nv(); ++iv)
    for (int ik = 0; ik < spec.nk(); ++ik) {
      const double c = cot[iv][ik];
      if (std::isnan(c)) continue;
      Gait g;
      g.segments = 2;
      g.v_avg = spec.v_at(iv);
      g.k_l = spec.k_at(ik);
      g.cot = c;
      g.status = nlp::SolveStatus::kConverged;
      m.cells[m.index(iv, ik)] = g;
      m.state[m.index(iv, ik)] = CellState::kSolved;
    }
  return m;
}

std::string read(const std::filesystem::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Every file of a map directory, concatenated in path order.
std::string snapshot(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += std::filesystem::relative(f, dir).string() + "\n" + read(f);
  return out;
}

const double kNone = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("grid geometry") {
  const GridSpec desk = GridSpec::desk();
  CHECK(desk.nk() == 25);
  CHECK(desk.nv() == 13);
  CHECK(desk.k_at(24) == doctest::Approx(13.0));
  CHECK(desk.v_at(12) == doctest::Approx(1.4));
  const GridSpec fine = GridSpec::fine();
  CHECK(fine.nk() == 121);
  CHECK(fine.nv() == 127);
  CHECK(desk.nearest_k(4.44) == 7);  // 4.5
  CHECK(desk.nearest_k(-3.0) == 0);
  CHECK(desk.nearest_v(9.0) == 12);
  CHECK(GridSpec::parse(desk.to_text()).to_text() == desk.to_text());
  CHECK(GridSpec::parse("dk = 0.25\nk_min = 1\nk_max = 13\nv_min = 0.2\nv_max = 1.4\ndv = 0.1").nk() == 49);
  CHECK_THROWS_AS(GridSpec::parse("dk = 0"), ConfigError);
  CHECK_THROWS_AS(GridSpec::parse("k_max = 0.5"), ConfigError);
  CHECK_THROWS_AS(GridSpec::parse("stride = 2"), ConfigError);
}

TEST_CASE("spearman rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ties get average ranks: x -> [1, 2.5, 2.5, 4], y -> [1, 3, 2, 4];
  // Pearson of the ranks is 4.5 / sqrt(4.5 * 5).
  CHECK(spearman({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-14));
  CHECK(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  CHECK_THROWS_AS(spearman({1, 2}, {1}), DomainError);
}

TEST_CASE("families from a synthetic map") {
  const GridSpec spec{1.0, 4.0, 1.0, 0.5, 0.8, 0.1};  // k 1..4, v 0.5..0.8
  // Column minima at k = 4, 3, 2, 2 -> mean 2.75 snaps to 3.
  const GaitMap m = synthetic_map(spec, {{2.0, 1.6, 1.2, 1.0},
                                         {1.5, 1.2, 1.0, 1.1},
                                         {1.2, 1.0, 1.05, 1.3},
                                         {1.0, 0.9, 1.0, 1.4}});
  const Families f = extract_families(m);
  CHECK(f.k_bar == 3.0);
  REQUIRE(f.rows.size() == 4);
  CHECK(f.rows[0].k_a == 4.0);
  CHECK(f.rows[0].penalty == doctest::Approx(0.2));
  CHECK(f.rows[1].penalty == 0.0);
  CHECK(f.rows[2].penalty == doctest::Approx(0.05));
  CHECK(f.rows[3].penalty == doctest::Approx(0.1 / 0.9));
  CHECK(f.max_penalty == doctest::Approx(0.2));
  CHECK(f.argmax_speed == doctest::Approx(0.5));
  CHECK(f.mean_penalty == doctest::Approx((0.2 + 0.0 + 0.05 + 0.1 / 0.9) / 4));
  for (const auto& r : f.rows) CHECK(r.cot_c >= r.cot_a);
  CHECK(spearman(f.a_speeds, f.a_stiffness) < 0);
  CHECK(f.warnings.empty());
}

TEST_CASE("families: empty columns are excluded with a warning, one column has no penalty") {
  const GridSpec spec{1.0, 3.0, 1.0, 0.5, 0.7, 0.1};
  const Families f = extract_families(synthetic_map(spec, {{kNone, kNone, kNone}, {1.3, 1.1, 1.2}, {kNone, kNone, kNone}}));
  CHECK(f.warnings.size() == 2);
  REQUIRE(f.rows.size() == 1);
  CHECK(f.k_bar == 2.0);
  CHECK(f.rows[0].cot_a == f.rows[0].cot_c);
  CHECK(f.rows[0].penalty == 0.0);
  CHECK(f.mean_penalty == 0.0);
  // A constant-stiffness cell that is missing drops that speed.
  const Families g = extract_families(synthetic_map(spec, {{1.0, kNone, 1.1}, {1.2, 1.1, 1.3}, {kNone, 1.0, kNone}}));
  CHECK(g.k_bar == 2.0);
  CHECK(g.rows.size() == 2);
  CHECK(g.warnings.size() == 1);
}

TEST_CASE("CSV tables round-trip at 12 significant digits") {
  CsvTable t;
  t.columns = {"a", "b"};
  t.add({1.0 / 3.0, -2.5e-9});
  t.add({123456.789012345678, 0.0});
  const CsvTable back = CsvTable::parse(t.to_string());
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(format12(1.0 / 3.0) == "0.333333333333");
  CHECK(round12(round12(M_PI)) == round12(M_PI));
  CHECK_THROWS_AS(CsvTable::parse("a,b\n1\n"), ConfigError);
  CHECK_THROWS_AS(CsvTable::parse("a\nx\n"), ConfigError);
}

TEST_CASE("seed sampling stays in the hop-in-place region and is reproducible") {
  const ModelParams p;
  for (int s = 0; s < 50; ++s) {
    const SeedSample a = sample_seed(7, s, 0), b = sample_seed(7, s, 0);
    CHECK(a.x0.stacked() == b.x0.stacked());
    CHECK(a.k_l == b.k_l);
    CHECK(std::abs(a.x0.q[kPhi]) <= 0.05);
    CHECK(std::abs(a.x0.q[kAlpha]) <= 0.05);
    CHECK(a.x0.q[kLeg] >= 0.9);
    CHECK(a.x0.q[kLeg] <= 1.0);
    CHECK(a.x0.qdot.cwiseAbs().maxCoeff() <= 0.1);
    CHECK(a.k_l >= 2.0);
    CHECK(a.k_l <= 8.0);
    // Foot on the ground.
    CHECK(a.x0.q[kY] - a.x0.q[kLeg] * std::cos(a.x0.q[kPhi] + a.x0.q[kAlpha]) - p.r_f == doctest::Approx(0.0));
    // Knot amplitudes; the cubic may overshoot between knots.
    for (int i = 0; i <= 6; ++i) {
      const double t = 0.5 * i;
      CHECK(std::abs(a.u_stance.value(t)[0]) <= 1.0 + 1e-12);
      CHECK(std::abs(a.u_stance.value(t)[1]) <= 2.0 + 1e-12);
      CHECK(std::abs(a.u_flight.value(t)[0]) <= 1.0 + 1e-12);
      CHECK(std::abs(a.u_flight.value(t)[1]) <= 2.0 + 1e-12);
    }
  }
  CHECK(sample_seed(7, 0, 0).k_l != sample_seed(7, 1, 0).k_l);
  CHECK(sample_seed(7, 0, 0).k_l != sample_seed(8, 0, 0).k_l);
}

TEST_CASE("gait records round-trip and re-check") {
  const Gait& g = small_gait();
  REQUIRE(g.status == nlp::SolveStatus::kConverged);
  CHECK(g.free_stiffness);
  CHECK(g.cot > 0);
  const Gait back = Gait::from_json(g.to_json());
  CHECK(back.decision == g.decision);
  CHECK(back.multipliers == g.multipliers);
  CHECK(back.cot == g.cot);
  CHECK(back.k_l == g.k_l);
  CHECK(back.bounds_hash == BoundsConfig{}.hash());
  CHECK(gait_residual(back, BoundsConfig{}, ModelParams{}) <= 1e-6);
  CHECK_THROWS_AS(Gait::from_json("{}"), StorageError);
  CHECK_THROWS_AS(Gait::from_json("not json"), StorageError);
  CHECK_THROWS_AS(Gait::load("/nonexistent/gait.json"), StorageError);
}

TEST_CASE("resampling at the same resolution reproduces the nodes") {
  const Gait& g = small_gait();
  const nlp::Vector same = resample(g, g.segments, ModelParams{});
  CHECK((same - g.decision).cwiseAbs().maxCoeff() < 1e-12);
  const nlp::Vector fine = resample(g, 20, ModelParams{});
  const StrideLayout L{20};
  CHECK(L.duration(fine, Phase::kStance) == doctest::Approx(g.t_stance).epsilon(1e-12));
  CHECK(L.duration(fine, Phase::kFlight) == doctest::Approx(g.t_flight).epsilon(1e-12));
  // Shared knot times carry identical states and inputs.
  for (int j = 0; j <= 20; j += 2) {
    const NodeVector a = L.node(fine, Phase::kFlight, 2 * j), b = g.layout().node(g.decision, Phase::kFlight, j);
    CHECK((a.head<12>() - b.head<12>()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("the start cell at the gait's own stiffness reproduces its CoT") {
  const Gait& g = small_gait();
  const GaitNlp fixed(g.v_avg, StiffnessMode::fixed(g.k_l), g.segments, BoundsConfig{}, ModelParams{});
  const nlp::SolveResult r = nlp::solve(fixed, g.decision);
  REQUIRE(r.converged());
  CHECK(std::abs(r.objective - g.cot) < 1e-6);
}

TEST_CASE("warm start is deterministic and rejects bad input") {
  WarmStartOptions o;
  o.n_seeds = 1;
  o.segments = 10;
  const WarmStartResult a = warm_start(1.0, o, ModelParams{});
  CHECK(a.best.decision == small_gait().decision);
  CHECK(a.seeds.size() == 1);
  CHECK(a.seeds[0].converged);
  CHECK_THROWS_AS(warm_start(0.0, o, ModelParams{}), DomainError);
  o.n_seeds = 0;
  CHECK_THROWS_AS(warm_start(1.0, o, ModelParams{}), DomainError);
}

TEST_CASE("small grid exploration: determinism, threads, resume and storage") {
  const Gait& g0 = small_gait();
  const GridSpec spec{3.0, 5.0, 0.5, 0.9, 1.1, 0.1};  // 5 x 3 cells around g0
  ExploreOptions o;
  o.segments = 10;

  const auto d1 = scratch("map_a"), d2 = scratch("map_b"), d3 = scratch("map_c");
  o.directory = d1;
  const GaitMap a = explore_grid(g0, spec, ModelParams{}, o);
  CHECK(a.complete);
  CHECK(a.solved_count() == 15);
  for (const auto& c : a.cells) {
    REQUIRE(c.has_value());
    CHECK(!c->free_stiffness);
    CHECK(c->t_stance / c->segments >= 5 * BoundsConfig{}.dt_min);
  }
  // The start cell sits at v = 1, k = 3.5.
  CHECK(a.at(1, 1)->provenance == "g0");

  // Two threads produce the same files.
  o.directory = d2;
  o.threads = 2;
  const GaitMap b = explore_grid(g0, spec, ModelParams{}, o);
  CHECK(snapshot(d1) == snapshot(d2));

  // Interrupted after two steps, then resumed.
  o.directory = d3;
  o.threads = 1;
  o.max_steps = 2;
  const GaitMap partial = explore_grid(g0, spec, ModelParams{}, o);
  CHECK(!partial.complete);
  CHECK(partial.steps_done == 2);
  o.max_steps.reset();
  const GaitMap resumed = explore_grid(g0, spec, ModelParams{}, o);
  CHECK(resumed.complete);
  CHECK(snapshot(d1) == snapshot(d3));

  // A completed map is not recomputed and re-loads verified.
  const GaitMap loaded = load_map(d1);
  CHECK(loaded.solved_count() == 15);
  for (std::size_t c = 0; c < loaded.cells.size(); ++c) CHECK(loaded.cells[c]->decision == a.cells[c]->decision);

  // Different settings refuse to resume.
  o.segments = 12;
  CHECK_THROWS_AS(explore_grid(g0, spec, ModelParams{}, o), StorageError);

  const Families f = extract_families(loaded);
  for (const auto& r : f.rows) CHECK(r.cot_c >= r.cot_a);

  // A tampered cell is reported by name.
  {
    std::ofstream os(d1 / "cells" / "0_0.json", std::ios::trunc);
    os << "{ broken";
  }
  try {
    load_map(d1);
    FAIL("expected a storage error");
  } catch (const StorageError& e) {
    CHECK(std::string(e.what()).find("0_0.json") != std::string::npos);
  }
  CHECK_THROWS_AS(load_map(scratch("missing")), StorageError);
  for (const auto& d : {d1, d2, d3}) std::filesystem::remove_all(d);
}
