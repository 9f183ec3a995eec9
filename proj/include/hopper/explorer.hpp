// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Gait library construction: multi-seed warm start, grid exploration over
// (v_avg, k_l) and extraction of the adaptive (A) and constant (C)
// stiffness families.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopper/simulate.hpp"
#include "hopper/solver.hpp"
#include "hopper/transcription.hpp"

namespace hopper {

/// Warm start produced no usable gait; `what()` lists the per-seed failures.
class ExplorationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, unreadable or inconsistent files.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One optimized stride.
struct Gait {
  static constexpr const char* kSchema = "hopper.gait/1";

  int segments = 0;
  nlp::Vector decision;     // StrideLayout order
  nlp::Vector multipliers;  // empty if unknown
  double v_avg = 0.0;
  double k_l = 0.0;
  double t_stance = 0.0;
  double t_flight = 0.0;
  double cot = 0.0;
  bool free_stiffness = false;
  nlp::SolveStatus status = nlp::SolveStatus::kNumericalFailure;
  int iterations = 0;
  double feasibility = 0.0;
  std::string provenance;
  std::string bounds_hash;

  StrideLayout layout() const { return {segments}; }
  StiffnessMode stiffness_mode() const { return free_stiffness ? StiffnessMode::free() : StiffnessMode::fixed(k_l); }

  std::string to_json() const;
  /// Throws StorageError on malformed input.
  static Gait from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Gait load(const std::filesystem::path& path);
};

/// Packs a solver result on `problem` into a Gait.
Gait make_gait(const GaitNlp& problem, const nlp::SolveResult& result, std::string provenance);

/// Max constraint violation of the stored decision vector in its own NLP.
double gait_residual(const Gait& g, const BoundsConfig& bounds, const ModelParams& p);

/// Decision vector for `segments` segments per phase, interpolating the
/// gait's nodes with cubic Hermite polynomials in time.
nlp::Vector resample(const Gait& g, int segments, const ModelParams& p);

/// Decision vector sampled from a simulated stride.
nlp::Vector decision_from_stride(const StrideResult& stride, const InputSignal& u_stance, const InputSignal& u_flight,
                                 double k_l, int segments, const ModelParams& p);

/// Solved input spline of one phase (knots at every node).
InputSignal gait_input(const Gait& g, Phase phase);

struct ReintegrationReport {
  double terminal_error = 0.0;  // |x_sim(t_S + t_F) - x^F_2N|_inf before impact
  double periodicity_residual = 0.0;
  StrideResult stride;
};

/// Re-simulates the gait from x^S(0) with its own input spline.
ReintegrationReport reintegrate(const Gait& g, const ModelParams& p);

// ---------------------------------------------------------------------------
// Warm start

struct WarmStartOptions {
  int n_seeds = 50;
  std::uint64_t rng_seed = 1;
  int segments = 30;
  BoundsConfig bounds;
  nlp::SolverOptions solver;
  /// Random draws per seed until a stride completes without falling.
  int max_draws = 200;
  double trust_fraction = 0.2;
  /// Largest speed increment of the continuation from the seed's own speed.
  double speed_step = 0.25;
  std::ostream* log = nullptr;
};

/// Sampled initial condition and open-loop inputs of one seed.
struct SeedSample {
  State x0;
  double k_l = 0.0;
  InputSignal u_stance, u_flight;
};

/// Draws from the hop-in-place region: phi, alpha in +-0.05, l in [0.9, 1],
/// foot on the ground, velocities in +-0.1, k_l in [2, 8], input splines
/// with |tau| <= 1 and |f| <= 2.
SeedSample sample_seed(std::uint64_t rng_seed, int seed_index, int draw);

struct SeedReport {
  int seed = 0;
  int draws = 0;
  std::string stage;  // last stage reached
  bool converged = false;
  double cot = 0.0;
  double k_l = 0.0;
  std::string message;
};

struct WarmStartResult {
  Gait best;
  std::vector<SeedReport> seeds;
  std::vector<Gait> converged;  // one per successful seed, seed order
};

/// Multi-seed warm start at v_avg; returns the lowest-CoT free-stiffness
/// gait. Throws ExplorationError if every seed fails.
WarmStartResult warm_start(double v_avg, const WarmStartOptions& options, const ModelParams& p);

// ---------------------------------------------------------------------------
// Grid exploration

struct GridSpec {
  double k_min = 1.0, k_max = 13.0, dk = 0.5;
  double v_min = 0.2, v_max = 1.4, dv = 0.1;

  static GridSpec fine() { return {1.0, 13.0, 0.1, 0.14, 1.4, 0.01}; }
  static GridSpec desk() { return {}; }

  void validate() const;
  int nk() const;
  int nv() const;
  double k_at(int ik) const { return k_min + ik * dk; }
  double v_at(int iv) const { return v_min + iv * dv; }
  int nearest_k(double k) const;
  int nearest_v(double v) const;
  std::string to_text() const;
  static GridSpec parse(const std::string& text);
};

enum class CellState { kUnvisited, kSolved, kFailed };

/// Neighbour offsets (dv, dk) in lexicographic order.
inline constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

struct GaitMap {
  static constexpr const char* kSchema = "hopper.gaitmap/1";

  GridSpec spec;
  int segments = 20;
  std::uint64_t rng_seed = 0;
  BoundsConfig bounds;
  ModelParams params;
  /// Feasibility threshold used to re-check stored gaits on load.
  double tol_eq = 1e-6;
  std::string bounds_hash;
  std::vector<std::optional<Gait>> cells;  // index iv * nk + ik
  std::vector<CellState> state;
  std::vector<int> attempts;
  /// Bumped whenever a cell's gait improves.
  std::vector<int> version;
  /// Version of each neighbour (kNeighbours order) when it last seeded this
  /// cell; -1 if never.
  std::vector<std::array<int, 8>> tried;
  /// Exploration progress: completed steps (rings, then re-check passes).
  int steps_done = 0;
  bool complete = false;

  GaitMap() = default;
  GaitMap(const GridSpec& s, int segments);
  int index(int iv, int ik) const { return iv * spec.nk() + ik; }
  const std::optional<Gait>& at(int iv, int ik) const { return cells[index(iv, ik)]; }
  int solved_count() const;
};

struct ExploreOptions {
  int segments = 20;
  BoundsConfig bounds;
  /// Neighbour warm starts sit close to the solution: small initial barrier,
  /// and a tight iteration cap so hopeless starts fail fast.
  nlp::SolverOptions solver{.max_iterations = 300, .mu_init = 1e-3};
  std::uint64_t rng_seed = 1;
  int max_recheck_passes = 3;
  double improvement_tol = 1e-8;
  /// Reject solutions whose segment duration is below this multiple of dt_min.
  double min_dt_factor = 5.0;
  /// Cells above this multiple of their speed column's median are re-solved
  /// from every neighbour.
  double outlier_factor = 10.0;
  int threads = 1;
  /// Stop after this many steps (rings or passes); the map stays resumable.
  std::optional<int> max_steps;
  /// Persist after every step and resume from an existing manifest.
  std::optional<std::filesystem::path> directory;
  std::ostream* log = nullptr;
};

/// Wavefront continuation from g0's cell, followed by neighbour re-check
/// passes. Failures are recorded, never fatal.
GaitMap explore_grid(const Gait& g0, const GridSpec& spec, const ModelParams& p, const ExploreOptions& options);

/// Directory persistence: manifest.json plus cells/<iv>_<ik>.json. The
/// extra JSON object is stored verbatim under "extra".
void save_map(const GaitMap& map, const std::filesystem::path& dir, const std::string& extra_manifest_json = "{}");
/// Throws StorageError naming every missing, corrupt or infeasible cell.
GaitMap load_map(const std::filesystem::path& dir);
/// The "extra" object of a map manifest, serialized.
std::string load_map_extra(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Families

struct FamilyRow {
  double v = 0.0;
  double k_a = 0.0;
  double cot_a = 0.0;
  double cot_c = 0.0;
  double penalty = 0.0;  // (CoT_C - CoT_A) / CoT_A
};

struct Families {
  double k_bar = 0.0;
  std::vector<FamilyRow> rows;  // speeds with both A and C solved
  std::vector<double> a_speeds, a_stiffness;  // every speed with an A gait
  double max_penalty = 0.0;
  double argmax_speed = 0.0;
  double mean_penalty = 0.0;
  std::vector<std::string> warnings;
};

Families extract_families(const GaitMap& map);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hopper
