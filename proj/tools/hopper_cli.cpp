// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

// hopper: command-line front end for gait optimization and exploration.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 the solver did
// not converge (or a gait failed its check), 4 file or map error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hopper/csv.hpp"
#include "hopper/explorer.hpp"
#include "hopper/keyvalue.hpp"
#include "hopper/params.hpp"

namespace {

using namespace hopper;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Leveled logging to stderr. 0: errors only, 1: progress, 2: solver iterations.
struct Log {
  int level = 1;
  std::ostream* progress() const { return level >= 1 ? &std::cerr : nullptr; }
  std::ostream* solver() const { return level >= 2 ? &std::cerr : nullptr; }
  void info(const std::string& s) const {
    if (level >= 1) std::cerr << s << '\n';
  }
};

// Key-value run configuration. Keys are grouped by prefix:
//   model.<name>, bounds.<name>, grid.<name>, solver.<name>
// plus params_file, rng_seed, seeds, segments, threads, output.
struct RunConfig {
  ModelParams params;
  BoundsConfig bounds;
  GridSpec grid = GridSpec::desk();
  nlp::SolverOptions solver;
  std::uint64_t rng_seed = 1;
  int seeds = 10;
  int segments = 20;
  int threads = 1;
  std::string output;

  static RunConfig load(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    std::string text;
    try {
      text = read_text_file(path);
    } catch (const ConfigError& e) {
      throw StorageError(e.what());
    }
    std::map<std::string, std::string> groups;
    std::string params_file;
    for (const auto& [key, value] : parse_key_values(text)) {
      const auto dot = key.find('.');
      if (dot != std::string::npos) {
        const std::string group = key.substr(0, dot), name = key.substr(dot + 1);
        if (group == "solver") {
          c.set_solver(name, value);
        } else if (group == "model" || group == "bounds" || group == "grid") {
          groups[group] += name + " = " + value + "\n";
        } else {
          throw ConfigError("unknown config group '" + group + "'");
        }
      } else if (key == "params_file") {
        params_file = value;
      } else if (key == "rng_seed") {
        const int s = parse_int(key, value);
        if (s < 0) throw ConfigError("rng_seed must be non-negative");
        c.rng_seed = static_cast<std::uint64_t>(s);
      } else if (key == "seeds") {
        c.seeds = parse_int(key, value);
      } else if (key == "segments") {
        c.segments = parse_int(key, value);
      } else if (key == "threads") {
        c.threads = parse_int(key, value);
      } else if (key == "output") {
        c.output = value;
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
    if (!params_file.empty()) {
      const auto base = std::filesystem::path(path).parent_path();
      auto pf = std::filesystem::path(params_file);
      if (pf.is_relative()) pf = base / pf;
      std::string ptext;
      try {
        ptext = read_text_file(pf);
      } catch (const ConfigError& e) {
        throw StorageError(e.what());
      }
      c.params = ModelParams::parse(ptext + groups["model"]);
    } else if (groups.count("model")) {
      c.params = ModelParams::parse(groups["model"]);
    }
    if (groups.count("bounds")) c.bounds = BoundsConfig::parse(groups["bounds"]);
    if (groups.count("grid")) {
      // Unlisted grid keys keep the desk defaults.
      c.grid = GridSpec::parse(GridSpec::desk().to_text() + groups["grid"]);
    }
    if (c.seeds < 1) throw ConfigError("seeds must be at least 1");
    if (c.segments < 2) throw ConfigError("segments must be at least 2");
    if (c.threads < 1) throw ConfigError("threads must be at least 1");
    c.solver.validate();
    return c;
  }

  void set_solver(const std::string& name, const std::string& value) {
    if (name == "tol_eq") solver.tol_eq = parse_double(name, value);
    else if (name == "tol_stat") solver.tol_stat = parse_double(name, value);
    else if (name == "max_iterations") solver.max_iterations = parse_int(name, value);
    else if (name == "mu_init") solver.mu_init = parse_double(name, value);
    else if (name == "max_outer") solver.max_outer = parse_int(name, value);
    else if (name == "max_inner") solver.max_inner = parse_int(name, value);
    else if (name == "backend") {
      if (value == "interior-point") solver.backend = nlp::Backend::kInteriorPoint;
      else if (value == "augmented-lagrangian") solver.backend = nlp::Backend::kAugmentedLagrangian;
      else throw ConfigError("unknown solver backend '" + value + "'");
    } else {
      throw ConfigError("unknown solver option '" + name + "'");
    }
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw StorageError("cannot write " + path);
  os << text;
  if (!os) throw StorageError("write failed for " + path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text(path, text);
}

void print_gait(const Gait& g) {
  std::cout << "status: " << nlp::to_string(g.status) << "\n"
            << "v_avg: " << format12(g.v_avg) << "\n"
            << "k_l: " << format12(g.k_l) << (g.free_stiffness ? " (free)" : " (fixed)") << "\n"
            << "CoT: " << format12(g.cot) << "\n"
            << "t_stance: " << format12(g.t_stance) << "\n"
            << "t_flight: " << format12(g.t_flight) << "\n"
            << "iterations: " << g.iterations << "\n"
            << "feasibility: " << format12(g.feasibility) << "\n";
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  double v = 0.0;
  std::optional<double> k;
  bool free_stiffness = false;
  std::optional<int> segments, seeds;
  std::string init, out = "gait.json";
};

int cmd_solve(const SolveArgs& a, const RunConfig& cfg, const Log& log) {
  if (!(a.v > 0)) throw UsageFailure("--v must be positive");
  if (a.k.has_value() == a.free_stiffness) throw UsageFailure("give exactly one of --k and --free-stiffness");
  if (a.k && !(*a.k > 0)) throw UsageFailure("--k must be positive");
  const int n = a.segments.value_or(30);
  if (n < 2) throw UsageFailure("--segments must be at least 2");

  nlp::Vector guess;
  Gait start;
  if (!a.init.empty()) {
    start = Gait::load(a.init);
    guess = resample(start, n, cfg.params);
  } else {
    WarmStartOptions wo;
    wo.n_seeds = a.seeds.value_or(cfg.seeds);
    wo.rng_seed = cfg.rng_seed;
    wo.segments = n;
    wo.bounds = cfg.bounds;
    wo.solver = cfg.solver;
    wo.log = log.progress();
    try {
      start = warm_start(a.v, wo, cfg.params).best;
    } catch (const ExplorationError& e) {
      throw SolverFailure(e.what());
    }
    guess = start.decision;
    if (a.free_stiffness) {
      start.save(a.out);
      print_gait(start);
      return kExitOk;
    }
  }

  nlp::SolverOptions so = cfg.solver;
  so.log = log.solver();
  const auto run = [&](double v, StiffnessMode mode) {
    const GaitNlp problem(v, mode, n, cfg.bounds, cfg.params);
    nlp::Vector x = guess;
    if (mode.is_fixed()) {
      const StrideLayout L{n};
      for (Phase ph : {Phase::kStance, Phase::kFlight})
        for (int j = 0; j < L.nodes_per_phase(); ++j) x[L.offset(ph, j) + node::kK] = mode.value;
    }
    const nlp::SolveResult r = nlp::solve(problem, x, so);
    if (r.converged()) guess = r.x;
    return std::pair{make_gait(problem, r, a.init.empty() ? "cli warm start" : "cli from " + a.init), r};
  };

  std::pair<Gait, nlp::SolveResult> result;
  if (a.free_stiffness) {
    result = run(a.v, StiffnessMode::free());
  } else {
    // Continuation in stiffness from the starting gait, steps of at most 0.5.
    const double k0 = start.k_l;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(*a.k - k0) / 0.5)));
    for (int i = 1; i <= steps; ++i) {
      const double k = i == steps ? *a.k : k0 + (*a.k - k0) * i / steps;
      result = run(a.v, StiffnessMode::fixed(k));
      log.info("k " + format12(k) + ": " + nlp::to_string(result.second.status));
      if (!result.second.converged()) break;
    }
  }
  const Gait& g = result.first;
  print_gait(g);
  if (!result.second.converged()) {
    std::cerr << "error: solver did not converge: " << result.second.message << "\n";
    return kExitSolver;
  }
  g.save(a.out);
  log.info("wrote " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check

struct CheckArgs {
  std::string gait;
  double tol = 1e-3;
  std::string trajectory, keyframes;
};

int cmd_check(const CheckArgs& a, const RunConfig& cfg, const Log& log) {
  if (!(a.tol > 0)) throw UsageFailure("--tol must be positive");
  const Gait g = Gait::load(a.gait);
  const double residual = gait_residual(g, cfg.bounds, cfg.params);
  ReintegrationReport rep;
  bool simulated = true;
  std::string sim_error;
  try {
    rep = reintegrate(g, cfg.params);
  } catch (const std::exception& e) {
    simulated = false;
    sim_error = e.what();
  }
  std::cout << "CoT: " << format12(g.cot) << "\n"
            << "transcription_residual: " << format12(residual) << "\n";
  if (simulated) {
    std::cout << "reintegration_deviation: " << format12(rep.terminal_error) << "\n"
              << "periodicity_residual: " << format12(rep.periodicity_residual) << "\n";
    if (!a.trajectory.empty()) {
      std::ostringstream os;
      write_trajectory_csv(os, {&rep.stride.stance, &rep.stride.flight});
      write_text(a.trajectory, os.str());
      log.info("wrote " + a.trajectory);
    }
    if (!a.keyframes.empty()) {
      // Event codes: 0 touchdown, 1 liftoff, 2 apex, 3 next touchdown (pre-impact).
      CsvTable t;
      t.columns = {"event", "t", "x", "y", "phi", "alpha", "l", "xd", "yd", "phid", "alphad", "ld"};
      const auto add = [&](double id, double time, const State& x) {
        std::vector<double> row{id, time};
        for (int i = 0; i < 10; ++i) row.push_back(x.stacked()[i]);
        t.add(row);
      };
      const auto& st = rep.stride.stance;
      const auto& fl = rep.stride.flight;
      add(0, 0.0, st.states.front());
      add(1, st.event_time, st.states.back());
      std::size_t apex = 0;
      for (std::size_t i = 0; i < fl.states.size(); ++i)
        if (fl.states[i].q[kY] > fl.states[apex].q[kY]) apex = i;
      add(2, st.event_time + fl.times[apex], fl.states[apex]);
      add(3, st.event_time + fl.event_time, fl.states.back());
      write_text(a.keyframes, t.to_string());
      log.info("wrote " + a.keyframes);
    }
  } else {
    std::cout << "reintegration: failed (" << sim_error << ")\n";
  }
  const bool ok = residual <= cfg.solver.tol_eq && simulated && rep.terminal_error < a.tol;
  std::cout << "check: " << (ok ? "pass" : "fail") << "\n";
  return ok ? kExitOk : kExitSolver;
}

// ---------------------------------------------------------------------------
// explore, families, export

struct ExploreArgs {
  std::string out, gait;
  double v0 = 1.0;
  std::optional<int> threads, max_steps;
};

int cmd_explore(const ExploreArgs& a, const RunConfig& cfg, const Log& log) {
  const std::string dir = a.out.empty() ? cfg.output : a.out;
  if (dir.empty()) throw UsageFailure("no output directory (--out or output in the config)");
  if (!(a.v0 > 0)) throw UsageFailure("--v0 must be positive");
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);

  Gait g0;
  const auto g0_path = root / "g0.json";
  if (!a.gait.empty()) {
    g0 = Gait::load(a.gait);
  } else if (std::filesystem::exists(g0_path)) {
    g0 = Gait::load(g0_path);
    log.info("reusing " + g0_path.string());
  } else {
    WarmStartOptions wo;
    wo.n_seeds = cfg.seeds;
    wo.rng_seed = cfg.rng_seed;
    wo.bounds = cfg.bounds;
    wo.solver = cfg.solver;
    wo.log = log.progress();
    try {
      g0 = warm_start(a.v0, wo, cfg.params).best;
    } catch (const ExplorationError& e) {
      throw SolverFailure(e.what());
    }
  }
  if (!std::filesystem::exists(g0_path)) g0.save(g0_path);

  ExploreOptions eo;
  eo.segments = cfg.segments;
  eo.bounds = cfg.bounds;
  eo.solver.tol_eq = cfg.solver.tol_eq;
  eo.solver.tol_stat = cfg.solver.tol_stat;
  eo.solver.max_iterations = cfg.solver.max_iterations;
  eo.solver.backend = cfg.solver.backend;
  eo.rng_seed = cfg.rng_seed;
  eo.threads = a.threads.value_or(cfg.threads);
  if (eo.threads < 1) throw UsageFailure("--threads must be at least 1");
  eo.max_steps = a.max_steps;
  eo.directory = root / "map";
  eo.log = log.progress();
  const GaitMap map = explore_grid(g0, cfg.grid, cfg.params, eo);
  std::cout << "solved: " << map.solved_count() << "/" << map.cells.size() << "\n"
            << "steps: " << map.steps_done << "\n"
            << "complete: " << (map.complete ? "yes" : "no") << "\n";
  return kExitOk;
}

// Accepts either the explore output directory or the map directory itself.
GaitMap open_map(const std::string& dir) {
  const std::filesystem::path p(dir);
  if (std::filesystem::exists(p / "map" / "manifest.json")) return load_map(p / "map");
  return load_map(p);
}

CsvTable families_table(const Families& f) {
  CsvTable t;
  t.columns = {"v", "k_A", "CoT_A", "CoT_C", "penalty"};
  for (const auto& r : f.rows) t.add({r.v, r.k_a, r.cot_a, r.cot_c, r.penalty});
  return t;
}

int cmd_families(const std::string& dir, const std::string& out) {
  const GaitMap map = open_map(dir);
  const Families f = extract_families(map);
  for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";
  if (f.rows.empty()) throw StorageError(dir + ": map has no solved speed column");
  std::cerr << "k_bar: " << format12(f.k_bar) << "\n"
            << "max_penalty: " << format12(f.max_penalty) << " at v = " << format12(f.argmax_speed) << "\n"
            << "mean_penalty: " << format12(f.mean_penalty) << "\n"
            << "spearman_kA_v: " << format12(spearman(f.a_speeds, f.a_stiffness)) << "\n";
  emit(out, families_table(f).to_string());
  return kExitOk;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double("--speeds", item));
  return out;
}

int cmd_export(const std::string& dir, const std::string& figure, const std::string& out,
               const std::string& speeds) {
  const GaitMap map = open_map(dir);
  if (map.solved_count() == 0) throw StorageError(dir + ": map has no solved cells; nothing to export");
  CsvTable t;
  const GridSpec& s = map.spec;
  if (figure == "fig3") {
    t.columns = {"v", "k", "CoT"};
    for (int iv = 0; iv < s.nv(); ++iv)
      for (int ik = 0; ik < s.nk(); ++ik)
        if (const auto& g = map.at(iv, ik)) t.add({s.v_at(iv), s.k_at(ik), g->cot});
  } else if (figure == "fig4") {
    const Families f = extract_families(map);
    for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";
    t = families_table(f);
    t.columns = {"v", "CoT_A", "CoT_C", "penalty"};
    for (auto& r : t.rows) r.erase(r.begin() + 1);
  } else if (figure == "fig5") {
    std::vector<int> cols;
    if (speeds.empty()) {
      for (int iv = 0; iv < s.nv(); ++iv) cols.push_back(iv);
    } else {
      for (double v : parse_list(speeds)) {
        const int iv = s.nearest_v(v);
        if (std::abs(s.v_at(iv) - v) > 0.5 * s.dv) throw UsageFailure("speed " + format12(v) + " is off the grid");
        cols.push_back(iv);
      }
    }
    t.columns = {"v", "k", "CoT"};
    for (int iv : cols)
      for (int ik = 0; ik < s.nk(); ++ik)
        if (const auto& g = map.at(iv, ik)) t.add({s.v_at(iv), s.k_at(ik), g->cot});
  } else {
    throw UsageFailure("unknown figure '" + figure + "' (fig3, fig4 or fig5)");
  }
  if (t.empty()) throw StorageError(dir + ": no rows to export for " + figure);
  emit(out, t.to_string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-optimal hopping gaits: solve, check, explore, families, export"};
  app.require_subcommand(1);
  std::string config_path;
  int verbosity = 1;
  app.add_option("-c,--config", config_path, "key-value run configuration file");
  app.add_option("--verbosity", verbosity, "0 errors only, 1 progress, 2 solver iterations")->check(CLI::Range(0, 2));
  app.add_flag_callback("-q,--quiet", [&] { verbosity = 0; }, "same as --verbosity 0");

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "optimize one gait at a given speed");
  solve->add_option("--v", sa.v, "average forward speed")->required();
  solve->add_option("--k", sa.k, "fixed leg stiffness");
  solve->add_flag("--free-stiffness", sa.free_stiffness, "optimize the leg stiffness too");
  solve->add_option("--segments", sa.segments, "segments per phase (default 30)");
  solve->add_option("--seeds", sa.seeds, "warm-start seeds");
  solve->add_option("--init", sa.init, "start from this gait instead of a warm start");
  solve->add_option("-o,--out", sa.out, "gait JSON output")->capture_default_str();

  CheckArgs ca;
  auto* check = app.add_subcommand("check", "re-check and re-integrate a gait");
  check->add_option("gait", ca.gait, "gait JSON")->required();
  check->add_option("--tol", ca.tol, "allowed re-integration deviation")->capture_default_str();
  check->add_option("--trajectory", ca.trajectory, "write the simulated stride as CSV");
  check->add_option("--keyframes", ca.keyframes, "write touchdown/liftoff/apex states as CSV");

  ExploreArgs ea;
  auto* explore = app.add_subcommand("explore", "build or resume a gait map over (v, k)");
  explore->add_option("-o,--out", ea.out, "output directory");
  explore->add_option("--gait", ea.gait, "starting gait (default: warm start)");
  explore->add_option("--v0", ea.v0, "warm-start speed")->capture_default_str();
  explore->add_option("--threads", ea.threads, "parallel cell solves");
  explore->add_option("--max-steps", ea.max_steps, "stop after this many steps (resumable)");

  std::string fam_dir, fam_out;
  auto* families = app.add_subcommand("families", "extract families A and C and their CoT penalty");
  families->add_option("map", fam_dir, "map directory")->required();
  families->add_option("-o,--out", fam_out, "CSV output (default stdout)");

  std::string ex_dir, ex_fig, ex_out, ex_speeds;
  auto* exp = app.add_subcommand("export", "write figure data as CSV");
  exp->add_option("map", ex_dir, "map directory")->required();
  exp->add_option("--figure", ex_fig, "fig3, fig4 or fig5")->required();
  exp->add_option("-o,--out", ex_out, "CSV output (default stdout)");
  exp->add_option("--speeds", ex_speeds, "comma-separated speed slices for fig5");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Log log{verbosity};
  try {
    const RunConfig cfg = RunConfig::load(config_path);
    if (*solve) return cmd_solve(sa, cfg, log);
    if (*check) return cmd_check(ca, cfg, log);
    if (*explore) return cmd_explore(ea, cfg, log);
    if (*families) return cmd_families(fam_dir, fam_out);
    if (*exp) return cmd_export(ex_dir, ex_fig, ex_out, ex_speeds);
  } catch (const UsageFailure& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const StorageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}
