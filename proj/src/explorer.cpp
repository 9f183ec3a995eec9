// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <atomic>
#include <thread>

#include "hopper/keyvalue.hpp"
#include "json.hpp"

namespace hopper {

using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

json vector_to_json(const nlp::Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

nlp::Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const nlp::Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw StorageError("cannot write " + tmp);
    os << text;
    if (!os) throw StorageError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot rename " + tmp + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StorageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlp::SolveStatus status_from_string(const std::string& s) {
  for (auto st : {nlp::SolveStatus::kConverged, nlp::SolveStatus::kMaxIter, nlp::SolveStatus::kInfeasible,
                  nlp::SolveStatus::kNumericalFailure})
    if (nlp::to_string(st) == s) return st;
  throw StorageError("unknown solver status '" + s + "'");
}

// Cubic Hermite on [0, h] at s in [0, 1].
template <class V>
V hermite(const V& a, const V& da, const V& b, const V& db, double h, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * a + (s3 - 2 * s2 + s) * h * da + (-2 * s3 + 3 * s2) * b + (s3 - s2) * h * db;
}

// Uniform [0, 1) from the top 53 bits; independent of the library's
// distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

std::mt19937_64 seeded_rng(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 mixing of the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return std::mt19937_64(mix(mix(mix(base) ^ a) ^ b));
}

InputSignal random_spline(std::mt19937_64& rng, double duration, int knots) {
  std::vector<double> t(knots);
  std::vector<Vec2> v(knots), r(knots);
  for (int i = 0; i < knots; ++i) {
    t[i] = duration * i / (knots - 1);
    v[i] = Vec2(uniform(rng, -1.0, 1.0), uniform(rng, -2.0, 2.0));
  }
  // Centred-difference slopes; knot values carry the amplitude limits.
  for (int i = 0; i < knots; ++i) {
    const int a = std::max(0, i - 1), b = std::min(knots - 1, i + 1);
    r[i] = (v[b] - v[a]) / (t[b] - t[a]);
  }
  return InputSignal(std::move(t), std::move(v), std::move(r));
}

Vec10 phase_rate(Phase phase, const State& x, const Vec2& u, double k, const ModelParams& p) {
  const ControlInput in{u[0], u[1]};
  return phase == Phase::kStance ? stance_dynamics(x, in, k, p).xdot : flight_dynamics(x, in, k, p);
}

// Sample of a simulated phase at time t (Hermite on the integrator's grid).
Vec10 sample_trajectory(const SimTrajectory& tr, double k, double t, const ModelParams& p) {
  const auto it = std::upper_bound(tr.times.begin(), tr.times.end(), t);
  const std::size_t i =
      std::clamp<std::size_t>(static_cast<std::size_t>(it - tr.times.begin()), 1, tr.times.size() - 1) - 1;
  const double h = tr.times[i + 1] - tr.times[i];
  const double s = std::clamp((t - tr.times[i]) / h, 0.0, 1.0);
  return hermite<Vec10>(tr.states[i].stacked(), phase_rate(tr.phase, tr.states[i], tr.inputs[i], k, p),
                        tr.states[i + 1].stacked(), phase_rate(tr.phase, tr.states[i + 1], tr.inputs[i + 1], k, p),
                        h, s);
}

bool within_bounds(const SimTrajectory& tr, const BoundsConfig& b) {
  for (const State& x : tr.states) {
    const auto& q = x.q;
    if (q[kY] < b.y_min || q[kY] > b.y_max || std::abs(q[kPhi]) > b.phi_max || std::abs(q[kAlpha]) > b.alpha_max ||
        q[kLeg] < b.leg_min || q[kLeg] > b.leg_max)
      return false;
  }
  return true;
}

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gait records

std::string Gait::to_json() const {
  const StrideLayout L = layout();
  json nodes_s = json::array(), nodes_f = json::array();
  for (int j = 0; j < L.nodes_per_phase(); ++j) {
    nodes_s.push_back(vector_to_json(L.node(decision, Phase::kStance, j)));
    nodes_f.push_back(vector_to_json(L.node(decision, Phase::kFlight, j)));
  }
  json j = {
      {"schema", kSchema},
      {"segments", segments},
      {"v_avg", v_avg},
      {"k_l", k_l},
      {"t_stance", t_stance},
      {"t_flight", t_flight},
      {"cot", cot},
      {"free_stiffness", free_stiffness},
      {"status", nlp::to_string(status)},
      {"iterations", iterations},
      {"feasibility", feasibility},
      {"provenance", provenance},
      {"bounds_hash", bounds_hash},
      {"node_fields", {"x", "y", "phi", "alpha", "l", "xd", "yd", "phid", "alphad", "ld", "tau", "f", "dt", "k",
                       "v_tau", "v_f"}},
      {"stance", nodes_s},
      {"flight", nodes_f},
      {"multipliers", vector_to_json(multipliers)},
  };
  return j.dump(1);
}

Gait Gait::from_json(const std::string& text) {
  Gait g;
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != kSchema) throw StorageError("unsupported gait schema");
    g.segments = j.at("segments").get<int>();
    g.v_avg = j.at("v_avg").get<double>();
    g.k_l = j.at("k_l").get<double>();
    g.t_stance = j.at("t_stance").get<double>();
    g.t_flight = j.at("t_flight").get<double>();
    g.cot = j.at("cot").get<double>();
    g.free_stiffness = j.at("free_stiffness").get<bool>();
    g.status = status_from_string(j.at("status").get<std::string>());
    g.iterations = j.at("iterations").get<int>();
    g.feasibility = j.at("feasibility").get<double>();
    g.provenance = j.at("provenance").get<std::string>();
    g.bounds_hash = j.at("bounds_hash").get<std::string>();
    const StrideLayout L = g.layout();
    if (g.segments < 2) throw StorageError("gait has fewer than 2 segments");
    g.decision.resize(L.size());
    for (Phase ph : {Phase::kStance, Phase::kFlight}) {
      const json& nodes = j.at(ph == Phase::kStance ? "stance" : "flight");
      if (static_cast<int>(nodes.size()) != L.nodes_per_phase()) throw StorageError("node count mismatch");
      for (int k = 0; k < L.nodes_per_phase(); ++k) {
        const nlp::Vector nd = vector_from_json(nodes[k]);
        if (nd.size() != node::kSize) throw StorageError("node size mismatch");
        g.decision.segment<node::kSize>(L.offset(ph, k)) = nd;
      }
    }
    g.multipliers = vector_from_json(j.at("multipliers"));
  } catch (const json::exception& e) {
    throw StorageError(std::string("malformed gait record: ") + e.what());
  }
  return g;
}

void Gait::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

Gait Gait::load(const std::filesystem::path& path) {
  try {
    return from_json(read_file(path));
  } catch (const StorageError& e) {
    throw StorageError(path.string() + ": " + e.what());
  }
}

Gait make_gait(const GaitNlp& problem, const nlp::SolveResult& result, std::string provenance) {
  Gait g;
  const StrideLayout& L = problem.layout();
  g.segments = L.segments;
  g.decision = result.x;
  g.multipliers = result.multipliers;
  g.v_avg = problem.speed();
  g.k_l = L.stiffness(result.x);
  if (problem.stiffness().is_fixed()) g.k_l = problem.stiffness().value;
  g.t_stance = L.duration(result.x, Phase::kStance);
  g.t_flight = L.duration(result.x, Phase::kFlight);
  g.cot = result.objective;
  g.free_stiffness = !problem.stiffness().is_fixed();
  g.status = result.status;
  g.iterations = result.inner_iterations;
  g.feasibility = result.feasibility;
  g.provenance = std::move(provenance);
  g.bounds_hash = problem.bounds().hash();
  return g;
}

double gait_residual(const Gait& g, const BoundsConfig& bounds, const ModelParams& p) {
  const GaitNlp problem(g.v_avg, g.stiffness_mode(), g.segments, bounds, p);
  return problem.max_violation(g.decision);
}

nlp::Vector resample(const Gait& g, int segments, const ModelParams& p) {
  if (segments < 2) throw ConstructionError("resampling needs at least 2 segments");
  const StrideLayout from = g.layout(), to{segments};
  nlp::Vector a(to.size());
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    const auto nodes = from.phase_nodes(g.decision, ph);
    const double h_old = 0.5 * nodes[0][node::kDt];
    const double T = from.segments * nodes[0][node::kDt];
    const double dt_new = T / segments;
    std::vector<Lifted> rate(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) rate[j] = lifted_dynamics(nodes[j], ph, p);
    for (int j = 0; j < to.nodes_per_phase(); ++j) {
      const double t = 0.5 * dt_new * j;
      const int i = std::clamp(static_cast<int>(std::floor(t / h_old)), 0, static_cast<int>(nodes.size()) - 2);
      const double s = std::clamp((t - i * h_old) / h_old, 0.0, 1.0);
      const Lifted y = hermite<Lifted>(nodes[i].head<node::kLifted>(), rate[i], nodes[i + 1].head<node::kLifted>(),
                                       rate[i + 1], h_old, s);
      NodeVector nd;
      nd.head<node::kLifted>() = y;
      nd.tail<2>() = (1 - s) * nodes[i].tail<2>() + s * nodes[i + 1].tail<2>();
      nd[node::kDt] = dt_new;
      nd[node::kK] = nodes[0][node::kK];
      a.segment<node::kSize>(to.offset(ph, j)) = nd;
    }
  }
  return a;
}

nlp::Vector decision_from_stride(const StrideResult& stride, const InputSignal& u_stance, const InputSignal& u_flight,
                                 double k_l, int segments, const ModelParams& p) {
  const StrideLayout L{segments};
  nlp::Vector a(L.size());
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    const SimTrajectory& tr = ph == Phase::kStance ? stride.stance : stride.flight;
    const InputSignal& u = ph == Phase::kStance ? u_stance : u_flight;
    const double dt = tr.event_time / segments;
    for (int j = 0; j < L.nodes_per_phase(); ++j) {
      const double t = 0.5 * dt * j;
      const int o = L.offset(ph, j);
      a.segment<10>(o) = sample_trajectory(tr, k_l, t, p);
      a.segment<2>(o + node::kU) = u.value(t);
      a[o + node::kDt] = dt;
      a[o + node::kK] = k_l;
      a.segment<2>(o + node::kV) = u.rate(t);
    }
  }
  // The stride is anchored at x = 0.
  const double x0 = a[L.offset(Phase::kStance, 0)];
  for (Phase ph : {Phase::kStance, Phase::kFlight})
    for (int j = 0; j < L.nodes_per_phase(); ++j) a[L.offset(ph, j)] -= x0;
  return a;
}

InputSignal gait_input(const Gait& g, Phase phase) {
  const StrideLayout L = g.layout();
  std::vector<double> t;
  std::vector<Vec2> v, r;
  for (int j = 0; j < L.nodes_per_phase(); ++j) {
    const NodeVector nd = L.node(g.decision, phase, j);
    t.push_back(0.5 * nd[node::kDt] * j);
    v.emplace_back(nd[node::kU], nd[node::kU + 1]);
    r.emplace_back(nd[node::kV], nd[node::kV + 1]);
  }
  return InputSignal(std::move(t), std::move(v), std::move(r));
}

ReintegrationReport reintegrate(const Gait& g, const ModelParams& p) {
  const StrideLayout L = g.layout();
  const State x0 = State::from_stacked(L.node(g.decision, Phase::kStance, 0).head<10>());
  StrideOptions opts;
  opts.stance_hint = g.t_stance;
  opts.flight_hint = g.t_flight;
  ReintegrationReport rep;
  rep.stride = simulate_stride(x0, gait_input(g, Phase::kStance), gait_input(g, Phase::kFlight), g.k_l, p, opts);
  const Vec10 terminal = L.node(g.decision, Phase::kFlight, L.nodes_per_phase() - 1).head<10>();
  rep.terminal_error = (rep.stride.flight.final_state().stacked() - terminal).cwiseAbs().maxCoeff();
  rep.periodicity_residual = rep.stride.periodicity_residual;
  return rep;
}

// ---------------------------------------------------------------------------
// Warm start

SeedSample sample_seed(std::uint64_t rng_seed, int seed_index, int draw) {
  const ModelParams p;
  auto rng = seeded_rng(rng_seed, static_cast<std::uint64_t>(seed_index), static_cast<std::uint64_t>(draw));
  SeedSample s;
  const double phi = uniform(rng, -0.05, 0.05);
  const double alpha = uniform(rng, -0.05, 0.05);
  const double l = uniform(rng, 0.9, 1.0);
  // Foot on the ground: the hip height follows from the leg geometry.
  s.x0.q << 0.0, l * std::cos(phi + alpha) + p.r_f, phi, alpha, l;
  for (int i = 0; i < 5; ++i) s.x0.qdot[i] = uniform(rng, -0.1, 0.1);
  s.k_l = uniform(rng, 2.0, 8.0);
  s.u_stance = random_spline(rng, 3.0, 7);
  s.u_flight = random_spline(rng, 3.0, 7);
  return s;
}

namespace {

struct Stage {
  std::string name;
  nlp::SolveResult result;
};

bool durations_ok(const Gait& g, const BoundsConfig& b, double factor) {
  const double dt_floor = factor * b.dt_min;
  return g.t_stance / g.segments >= dt_floor && g.t_flight / g.segments >= dt_floor;
}

}  // namespace

WarmStartResult warm_start(double v_avg, const WarmStartOptions& o, const ModelParams& p) {
  if (!(v_avg > 0)) throw DomainError("warm start speed must be positive");
  if (o.n_seeds < 1 || o.segments < 2) throw DomainError("warm start needs at least one seed and two segments");
  o.bounds.validate();
  WarmStartResult out;
  std::ostringstream failures;
  const StrideLayout L{o.segments};

  for (int s = 0; s < o.n_seeds; ++s) {
    SeedReport rep;
    rep.seed = s;
    SeedSample sample;
    std::optional<StrideResult> stride;
    for (int d = 0; d < o.max_draws && !stride; ++d) {
      rep.draws = d + 1;
      sample = sample_seed(o.rng_seed, s, d);
      StrideOptions so;
      so.integrator.time_cap = 3.0;
      try {
        StrideResult r = simulate_stride(sample.x0, sample.u_stance, sample.u_flight, sample.k_l, p, so);
        const double min_t = 2.0 * o.segments * o.bounds.dt_min;
        if (r.stance.event_time < min_t || r.flight.event_time < min_t) continue;
        if (!within_bounds(r.stance, o.bounds) || !within_bounds(r.flight, o.bounds)) continue;  // fell
        stride = std::move(r);
      } catch (const std::exception&) {
        continue;
      }
    }
    if (!stride) {
      rep.stage = "simulate";
      rep.message = "no completed stride in " + std::to_string(o.max_draws) + " draws";
      failures << "seed " << s << ": " << rep.message << "\n";
      out.seeds.push_back(rep);
      continue;
    }

    nlp::Vector a = decision_from_stride(*stride, sample.u_stance, sample.u_flight, sample.k_l, o.segments, p);
    const double t_total = stride->stance.event_time + stride->flight.event_time;
    const double v_sim = a[L.offset(Phase::kFlight, L.nodes_per_phase() - 1)] / t_total;
    const double v_start = std::max(v_sim, 0.05);

    // Homotopy stages at the seed's own speed and stiffness.
    nlp::SolveResult last;
    std::string last_ok = "simulate";
    const auto run = [&](const GaitNlp& problem, const std::string& stage) {
      last = nlp::solve(problem, a, o.solver);
      rep.stage = stage;
      if (last.converged()) {
        a = last.x;
        last_ok = stage;
      }
      rep.message = nlp::to_string(last.status) + " (" + last.message + ")";
      return last.converged();
    };
    {
      GaitNlp trust(v_start, StiffnessMode::fixed(sample.k_l), o.segments, o.bounds, p);
      const nlp::Vector scale = trust.variable_scale();
      nlp::Vector lo = trust.variable_lower(), hi = trust.variable_upper();
      for (int i = 0; i < a.size(); ++i) {
        const double w = o.trust_fraction * std::max(std::abs(a[i]), scale[i]);
        lo[i] = std::max(lo[i], std::min(a[i], hi[i]) - w);
        hi[i] = std::min(hi[i], std::max(a[i], lo[i]) + w);
      }
      nlp::Vector lo1 = lo, hi1 = hi;
      for (Phase ph : {Phase::kStance, Phase::kFlight})
        for (int j = 0; j < L.nodes_per_phase(); ++j) {
          const int i = L.offset(ph, j) + node::kDt;
          lo1[i] = hi1[i] = std::clamp(a[i], trust.variable_lower()[i], trust.variable_upper()[i]);
        }
      trust.set_variable_bounds(lo1, hi1);
      run(trust, "frozen-durations");
      trust.set_variable_bounds(lo, hi);
      run(trust, "trust-region");
      trust.reset_variable_bounds();
      run(trust, "full-fixed-stiffness");
    }
    // Speed continuation with free stiffness, then the final free solve.
    bool ok = last_ok != "simulate";
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(v_avg - v_start) / o.speed_step)));
    for (int k = 1; ok && k <= steps; ++k) {
      const double v = v_start + (v_avg - v_start) * k / steps;
      GaitNlp problem(v, StiffnessMode::free(), o.segments, o.bounds, p);
      ok = run(problem, k == steps ? "final" : "speed " + fmt("%.3f", v));
      if (ok && k == steps) {
        Gait g = make_gait(problem, last, "seed " + std::to_string(s));
        if (!durations_ok(g, o.bounds, 5.0)) {
          rep.message = "rejected: collapsed phase duration";
          ok = false;
          break;
        }
        rep.converged = true;
        rep.cot = g.cot;
        rep.k_l = g.k_l;
        out.converged.push_back(std::move(g));
      }
    }
    if (!rep.converged) failures << "seed " << s << ": stage " << rep.stage << ": " << rep.message << "\n";
    say(o.log, "seed " + std::to_string(s) + " draws " + std::to_string(rep.draws) + " stage " + rep.stage +
                   (rep.converged ? " CoT " + fmt("%.6f", rep.cot) + " k " + fmt("%.4f", rep.k_l) : " " + rep.message));
    out.seeds.push_back(std::move(rep));
  }
  if (out.converged.empty()) throw ExplorationError("warm start failed for every seed:\n" + failures.str());
  const auto best = std::min_element(out.converged.begin(), out.converged.end(),
                                     [](const Gait& a, const Gait& b) { return a.cot < b.cot; });
  out.best = *best;
  return out;
}

// ---------------------------------------------------------------------------
// Grid

void GridSpec::validate() const {
  for (double x : {k_min, k_max, dk, v_min, v_max, dv})
    if (!std::isfinite(x)) throw ConfigError("grid values must be finite");
  if (!(dk > 0) || !(dv > 0)) throw ConfigError("grid steps must be positive");
  if (k_max < k_min || v_max < v_min) throw ConfigError("grid ranges must be non-empty");
  if (!(k_min > 0) || !(v_min > 0)) throw ConfigError("grid stiffness and speed must be positive");
  if (nk() * static_cast<long>(nv()) > 10'000'000) throw ConfigError("grid too large");
}

int GridSpec::nk() const { return static_cast<int>(std::floor((k_max - k_min) / dk + 1e-9)) + 1; }
int GridSpec::nv() const { return static_cast<int>(std::floor((v_max - v_min) / dv + 1e-9)) + 1; }
int GridSpec::nearest_k(double k) const { return std::clamp(static_cast<int>(std::lround((k - k_min) / dk)), 0, nk() - 1); }
int GridSpec::nearest_v(double v) const { return std::clamp(static_cast<int>(std::lround((v - v_min) / dv)), 0, nv() - 1); }

std::string GridSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "k_min = " << k_min << "\nk_max = " << k_max << "\ndk = " << dk << "\nv_min = " << v_min
     << "\nv_max = " << v_max << "\ndv = " << dv << "\n";
  return os.str();
}

GridSpec GridSpec::parse(const std::string& text) {
  GridSpec g;
  const std::map<std::string, double GridSpec::*> fields = {{"k_min", &GridSpec::k_min}, {"k_max", &GridSpec::k_max},
                                                            {"dk", &GridSpec::dk},       {"v_min", &GridSpec::v_min},
                                                            {"v_max", &GridSpec::v_max}, {"dv", &GridSpec::dv}};
  for (const auto& [key, value] : parse_key_values(text)) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown grid key '" + key + "'");
    g.*(it->second) = parse_double(key, value);
  }
  g.validate();
  return g;
}

GaitMap::GaitMap(const GridSpec& s, int n) : spec(s), segments(n) {
  spec.validate();
  const std::size_t size = static_cast<std::size_t>(spec.nk()) * spec.nv();
  cells.resize(size);
  state.assign(size, CellState::kUnvisited);
  attempts.assign(size, 0);
  version.assign(size, 0);
  std::array<int, 8> never;
  never.fill(-1);
  tried.assign(size, never);
}

int GaitMap::solved_count() const {
  return static_cast<int>(std::count(state.begin(), state.end(), CellState::kSolved));
}

// ---------------------------------------------------------------------------
// Exploration

namespace {

struct Attempt {
  int cell = 0;
  int from = -1;  // neighbour slot, -1 for g0
  std::optional<Gait> gait;
  std::string failure;
};

// Candidate ordering: lower CoT, then fewer iterations, then lower source slot.
bool better(const Attempt& a, const Attempt& b) {
  if (a.gait->cot != b.gait->cot) return a.gait->cot < b.gait->cot;
  if (a.gait->iterations != b.gait->iterations) return a.gait->iterations < b.gait->iterations;
  return a.from < b.from;
}

template <class Fn>
void run_parallel(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < std::min<int>(threads, static_cast<int>(n)); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

class Explorer {
 public:
  Explorer(GaitMap& map, const ModelParams& p, const ExploreOptions& o) : map_(map), p_(p), o_(o) {
    dirty_.assign(map_.cells.size(), 0);
  }

  int cell_of(int iv, int ik) const { return map_.index(iv, ik); }
  int iv_of(int c) const { return c / map_.spec.nk(); }
  int ik_of(int c) const { return c % map_.spec.nk(); }

  std::optional<int> neighbour(int c, int slot) const {
    const int iv = iv_of(c) + kNeighbours[slot][0], ik = ik_of(c) + kNeighbours[slot][1];
    if (iv < 0 || ik < 0 || iv >= map_.spec.nv() || ik >= map_.spec.nk()) return std::nullopt;
    return cell_of(iv, ik);
  }

  std::string cell_name(int c) const { return "(" + std::to_string(iv_of(c)) + "," + std::to_string(ik_of(c)) + ")"; }

  // Fixed-stiffness solve of cell c from a decision vector.
  Attempt solve(int c, int from, nlp::Vector a, const std::string& provenance) const {
    Attempt out{c, from, std::nullopt, {}};
    const double v = map_.spec.v_at(iv_of(c)), k = map_.spec.k_at(ik_of(c));
    const StrideLayout L{map_.segments};
    for (Phase ph : {Phase::kStance, Phase::kFlight})
      for (int j = 0; j < L.nodes_per_phase(); ++j) a[L.offset(ph, j) + node::kK] = k;
    try {
      const GaitNlp problem(v, StiffnessMode::fixed(k), map_.segments, o_.bounds, p_);
      const nlp::SolveResult r = nlp::solve(problem, a, o_.solver);
      if (!r.converged()) {
        out.failure = nlp::to_string(r.status);
        return out;
      }
      Gait g = make_gait(problem, r, provenance);
      if (!durations_ok(g, o_.bounds, o_.min_dt_factor)) {
        out.failure = "collapsed phase duration";
        return out;
      }
      if (!std::isfinite(g.cot) || g.cot < 0) {
        out.failure = "invalid CoT";
        return out;
      }
      out.gait = std::move(g);
    } catch (const std::exception& e) {
      out.failure = e.what();
    }
    return out;
  }

  Attempt solve_from_neighbour(int c, int slot) const {
    const int n = *neighbour(c, slot);
    return solve(c, slot, map_.cells[n]->decision, "from " + cell_name(n));
  }

  // Applies one cell's attempts; returns the CoT improvement (inf when a
  // previously unsolved cell gets a gait).
  double merge(int c, std::vector<Attempt>& attempts) {
    double gain = 0.0;
    const Attempt* best = nullptr;
    for (Attempt& a : attempts) {
      ++map_.attempts[c];
      if (a.from >= 0) map_.tried[c][a.from] = map_.version[*neighbour(c, a.from)];
      if (a.gait && (!best || better(a, *best))) best = &a;
    }
    auto& cell = map_.cells[c];
    // Gains below improvement_tol are the same optimum; replacing it would only
    // bump the version and re-queue every neighbour.
    if (best && (!cell || best->gait->cot < cell->cot - o_.improvement_tol)) {
      gain = cell ? cell->cot - best->gait->cot : std::numeric_limits<double>::infinity();
      cell = std::move(best->gait);
      map_.state[c] = CellState::kSolved;
      ++map_.version[c];
      dirty_[c] = 1;
    } else if (!cell && !attempts.empty()) {
      map_.state[c] = CellState::kFailed;
    }
    return gain;
  }

  void persist() {
    if (!o_.directory) return;
    write(*o_.directory);
  }

  void write(const std::filesystem::path& dir);
  void set_extra(std::string extra) { extra_ = std::move(extra); }

  // Cells whose CoT exceeds outlier_factor x their column median.
  std::vector<char> outliers() const {
    std::vector<char> flag(map_.cells.size(), 0);
    for (int iv = 0; iv < map_.spec.nv(); ++iv) {
      std::vector<double> col;
      for (int ik = 0; ik < map_.spec.nk(); ++ik)
        if (const auto& g = map_.cells[cell_of(iv, ik)]) col.push_back(g->cot);
      if (col.size() < 3) continue;
      std::sort(col.begin(), col.end());
      const std::size_t m = col.size() / 2;
      const double median = col.size() % 2 ? col[m] : 0.5 * (col[m - 1] + col[m]);
      for (int ik = 0; ik < map_.spec.nk(); ++ik)
        if (const auto& g = map_.cells[cell_of(iv, ik)]; g && g->cot > o_.outlier_factor * median)
          flag[cell_of(iv, ik)] = 1;
    }
    return flag;
  }

  GaitMap& map_;
  const ModelParams& p_;
  const ExploreOptions& o_;
  std::vector<char> dirty_;
  std::string extra_ = "{}";
};

std::string cell_file(int iv, int ik) { return std::to_string(iv) + "_" + std::to_string(ik) + ".json"; }

const char* state_name(CellState s) {
  switch (s) {
    case CellState::kSolved: return "solved";
    case CellState::kFailed: return "failed";
    default: return "unvisited";
  }
}

CellState state_from_name(const std::string& s) {
  if (s == "solved") return CellState::kSolved;
  if (s == "failed") return CellState::kFailed;
  if (s == "unvisited") return CellState::kUnvisited;
  throw StorageError("unknown cell state '" + s + "'");
}

json manifest_json(const GaitMap& m, const std::string& extra) {
  json cells = json::array();
  for (std::size_t c = 0; c < m.cells.size(); ++c)
    cells.push_back({{"state", state_name(m.state[c])},
                     {"attempts", m.attempts[c]},
                     {"version", m.version[c]},
                     {"tried", m.tried[c]}});
  json extra_json;
  try {
    extra_json = json::parse(extra);
  } catch (const json::exception& e) {
    throw StorageError(std::string("extra manifest data is not JSON: ") + e.what());
  }
  return {{"schema", GaitMap::kSchema},
          {"grid", {{"k_min", m.spec.k_min}, {"k_max", m.spec.k_max}, {"dk", m.spec.dk},
                    {"v_min", m.spec.v_min}, {"v_max", m.spec.v_max}, {"dv", m.spec.dv}}},
          {"segments", m.segments},
          {"rng_seed", m.rng_seed},
          {"bounds", m.bounds.to_text()},
          {"bounds_hash", m.bounds_hash},
          {"params", m.params.to_text()},
          {"tol_eq", m.tol_eq},
          {"steps_done", m.steps_done},
          {"complete", m.complete},
          {"cells", cells},
          {"extra", extra_json}};
}

void write_map(const GaitMap& m, const std::filesystem::path& dir, const std::string& extra,
               const std::vector<char>* dirty) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "cells", ec);
  if (ec) throw StorageError("cannot create " + (dir / "cells").string() + ": " + ec.message());
  for (int iv = 0; iv < m.spec.nv(); ++iv)
    for (int ik = 0; ik < m.spec.nk(); ++ik) {
      const int c = m.index(iv, ik);
      const auto path = dir / "cells" / cell_file(iv, ik);
      if (m.cells[c]) {
        if (!dirty || (*dirty)[c] || !std::filesystem::exists(path)) m.cells[c]->save(path);
      } else {
        std::filesystem::remove(path, ec);
      }
    }
  // The manifest goes last so a crash never leaves it pointing at missing cells.
  write_file_atomic(dir / "manifest.json", manifest_json(m, extra).dump(1));
}

void Explorer::write(const std::filesystem::path& dir) {
  write_map(map_, dir, extra_, &dirty_);
  std::fill(dirty_.begin(), dirty_.end(), 0);
}

int ring_count(const GridSpec& s, int iv0, int ik0) {
  return std::max({iv0, s.nv() - 1 - iv0, ik0, s.nk() - 1 - ik0});
}

}  // namespace

GaitMap explore_grid(const Gait& g0, const GridSpec& spec, const ModelParams& p, const ExploreOptions& o) {
  spec.validate();
  o.bounds.validate();
  o.solver.validate();
  if (o.segments < 2) throw DomainError("exploration needs at least two segments");
  if (o.threads < 1) throw DomainError("thread count must be at least 1");
  if (o.max_recheck_passes < 0) throw DomainError("re-check pass cap must be non-negative");
  if (g0.status != nlp::SolveStatus::kConverged) throw DomainError("starting gait is not converged");

  const int iv0 = spec.nearest_v(g0.v_avg), ik0 = spec.nearest_k(g0.k_l);
  json extra = {{"g0", {{"v_avg", g0.v_avg}, {"k_l", g0.k_l}, {"cot", g0.cot}}}};

  GaitMap map(spec, o.segments);
  map.rng_seed = o.rng_seed;
  map.bounds = o.bounds;
  map.params = p;
  map.tol_eq = o.solver.tol_eq;
  map.bounds_hash = o.bounds.hash();

  if (o.directory && std::filesystem::exists(*o.directory / "manifest.json")) {
    GaitMap old = load_map(*o.directory);
    const json old_extra = json::parse(load_map_extra(*o.directory));
    const bool same = old.spec.to_text() == spec.to_text() && old.segments == o.segments &&
                      old.rng_seed == o.rng_seed && old.bounds_hash == map.bounds_hash &&
                      old.params.to_text() == p.to_text() && old_extra.value("g0", json()) == extra["g0"];
    if (!same) throw StorageError(o.directory->string() + " holds a map from different settings");
    map = std::move(old);
    say(o.log, "resuming at step " + std::to_string(map.steps_done));
  }

  Explorer ex(map, p, o);
  ex.set_extra(extra.dump());
  if (map.steps_done == 0) ex.persist();  // a fresh map is visible on disk before the first solve
  const int rings = ring_count(spec, iv0, ik0);
  const int last_step = rings + o.max_recheck_passes;
  int budget = o.max_steps.value_or(std::numeric_limits<int>::max());

  while (!map.complete && budget-- > 0) {
    const int step = map.steps_done;
    if (step == 0) {
      const int c = ex.cell_of(iv0, ik0);
      std::vector<Attempt> at{ex.solve(c, -1, resample(g0, o.segments, p), "g0")};
      if (!at[0].gait) say(o.log, "start cell " + ex.cell_name(c) + " failed: " + at[0].failure);
      ex.merge(c, at);
    } else if (step <= rings) {
      // Ring `step`: every cell at this Chebyshev distance, seeded from ring step-1.
      std::vector<int> ring;
      for (int iv = 0; iv < spec.nv(); ++iv)
        for (int ik = 0; ik < spec.nk(); ++ik)
          if (std::max(std::abs(iv - iv0), std::abs(ik - ik0)) == step) ring.push_back(ex.cell_of(iv, ik));
      std::vector<std::vector<Attempt>> results(ring.size());
      run_parallel(ring.size(), o.threads, [&](std::size_t i) {
        const int c = ring[i];
        std::vector<int> slots;
        for (int s = 0; s < 8; ++s) {
          const auto n = ex.neighbour(c, s);
          if (!n || !map.cells[*n]) continue;
          if (std::max(std::abs(ex.iv_of(*n) - iv0), std::abs(ex.ik_of(*n) - ik0)) != step - 1) continue;
          slots.push_back(s);
        }
        // Axis neighbours first.
        std::stable_sort(slots.begin(), slots.end(), [](int a, int b) {
          const auto diag = [](int s) { return kNeighbours[s][0] != 0 && kNeighbours[s][1] != 0; };
          return !diag(a) && diag(b);
        });
        for (int s : slots) {
          results[i].push_back(ex.solve_from_neighbour(c, s));
          if (results[i].back().gait) break;
        }
      });
      int solved = 0;
      for (std::size_t i = 0; i < ring.size(); ++i) {
        ex.merge(ring[i], results[i]);
        solved += map.cells[ring[i]].has_value();
      }
      say(o.log, "ring " + std::to_string(step) + ": " + std::to_string(solved) + "/" + std::to_string(ring.size()) +
                     " cells solved");
    } else {
      // Re-check pass against a snapshot of the map; merged afterwards.
      const std::vector<char> outlier = ex.outliers();
      std::vector<std::pair<int, int>> jobs;  // (cell, slot)
      for (int c = 0; c < static_cast<int>(map.cells.size()); ++c)
        for (int s = 0; s < 8; ++s) {
          const auto n = ex.neighbour(c, s);
          if (!n || !map.cells[*n]) continue;
          if (!outlier[c] && map.tried[c][s] == map.version[*n]) continue;
          jobs.emplace_back(c, s);
        }
      std::vector<Attempt> results(jobs.size());
      run_parallel(jobs.size(), o.threads,
                   [&](std::size_t i) { results[i] = ex.solve_from_neighbour(jobs[i].first, jobs[i].second); });
      double max_gain = 0.0;
      int improved = 0;
      for (std::size_t i = 0; i < jobs.size();) {
        std::size_t j = i;
        std::vector<Attempt> batch;
        while (j < jobs.size() && jobs[j].first == jobs[i].first) batch.push_back(std::move(results[j++]));
        const double gain = ex.merge(jobs[i].first, batch);
        max_gain = std::max(max_gain, gain);
        improved += gain > o.improvement_tol;
        i = j;
      }
      say(o.log, "re-check pass " + std::to_string(step - rings) + ": " + std::to_string(jobs.size()) +
                     " solves, " + std::to_string(improved) + " cells improved");
      if (max_gain <= o.improvement_tol) map.complete = true;
    }
    map.steps_done = step + 1;
    if (map.steps_done > last_step) map.complete = true;
    ex.persist();
  }
  return map;
}

void save_map(const GaitMap& map, const std::filesystem::path& dir, const std::string& extra_manifest_json) {
  write_map(map, dir, extra_manifest_json, nullptr);
}

namespace {

json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw StorageError("no map manifest at " + path.string());
  try {
    json j = json::parse(read_file(path));
    if (j.at("schema").get<std::string>() != GaitMap::kSchema) throw StorageError("unsupported map schema");
    return j;
  } catch (const json::exception& e) {
    throw StorageError(path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace

std::string load_map_extra(const std::filesystem::path& dir) { return read_manifest(dir).value("extra", json::object()).dump(); }

GaitMap load_map(const std::filesystem::path& dir) {
  const json j = read_manifest(dir);
  GaitMap m;
  try {
    const json& g = j.at("grid");
    GridSpec spec{g.at("k_min").get<double>(), g.at("k_max").get<double>(), g.at("dk").get<double>(),
                  g.at("v_min").get<double>(), g.at("v_max").get<double>(), g.at("dv").get<double>()};
    m = GaitMap(spec, j.at("segments").get<int>());
    m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    m.bounds = BoundsConfig::parse(j.at("bounds").get<std::string>());
    m.params = ModelParams::parse(j.at("params").get<std::string>());
    m.tol_eq = j.at("tol_eq").get<double>();
    m.bounds_hash = j.at("bounds_hash").get<std::string>();
    m.steps_done = j.at("steps_done").get<int>();
    m.complete = j.at("complete").get<bool>();
    const json& cells = j.at("cells");
    if (cells.size() != m.cells.size()) throw StorageError("cell count does not match the grid");
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
      m.state[c] = state_from_name(cells[c].at("state").get<std::string>());
      m.attempts[c] = cells[c].at("attempts").get<int>();
      m.version[c] = cells[c].at("version").get<int>();
      m.tried[c] = cells[c].at("tried").get<std::array<int, 8>>();
    }
  } catch (const json::exception& e) {
    throw StorageError(dir.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw StorageError(dir.string() + ": bad manifest settings: " + e.what());
  }
  if (m.bounds.hash() != m.bounds_hash) throw StorageError(dir.string() + ": bounds hash mismatch");

  std::vector<std::string> bad;
  for (int iv = 0; iv < m.spec.nv(); ++iv)
    for (int ik = 0; ik < m.spec.nk(); ++ik) {
      const int c = m.index(iv, ik);
      if (m.state[c] != CellState::kSolved) continue;
      const std::string name = "cell " + cell_file(iv, ik);
      try {
        Gait g = Gait::load(dir / "cells" / cell_file(iv, ik));
        if (g.segments != m.segments || std::abs(g.v_avg - m.spec.v_at(iv)) > 1e-12 ||
            std::abs(g.k_l - m.spec.k_at(ik)) > 1e-12) {
          bad.push_back(name + ": does not match its grid point");
          continue;
        }
        const double r = gait_residual(g, m.bounds, m.params);
        if (!(r <= m.tol_eq)) {
          bad.push_back(name + ": residual " + fmt("%.3g", r));
          continue;
        }
        m.cells[c] = std::move(g);
      } catch (const std::exception& e) {
        bad.push_back(name + ": " + e.what());
      }
    }
  if (!bad.empty()) {
    std::string msg = dir.string() + ": " + std::to_string(bad.size()) + " bad cell(s):";
    for (const auto& b : bad) msg += "\n  " + b;
    throw StorageError(msg);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Families

Families extract_families(const GaitMap& map) {
  Families f;
  const GridSpec& s = map.spec;
  std::vector<int> a_index(s.nv(), -1);
  for (int iv = 0; iv < s.nv(); ++iv) {
    for (int ik = 0; ik < s.nk(); ++ik) {
      const auto& g = map.at(iv, ik);
      if (g && (a_index[iv] < 0 || g->cot < map.at(iv, a_index[iv])->cot)) a_index[iv] = ik;
    }
    if (a_index[iv] < 0) {
      f.warnings.push_back("speed " + fmt("%.6g", s.v_at(iv)) + " has no solved cell; excluded");
      continue;
    }
    f.a_speeds.push_back(s.v_at(iv));
    f.a_stiffness.push_back(s.k_at(a_index[iv]));
  }
  if (f.a_speeds.empty()) return f;
  const double mean_k = std::accumulate(f.a_stiffness.begin(), f.a_stiffness.end(), 0.0) / f.a_stiffness.size();
  const int ik_bar = s.nearest_k(mean_k);
  f.k_bar = s.k_at(ik_bar);
  for (int iv = 0; iv < s.nv(); ++iv) {
    if (a_index[iv] < 0) continue;
    const auto& c = map.at(iv, ik_bar);
    if (!c) {
      f.warnings.push_back("speed " + fmt("%.6g", s.v_at(iv)) + " has no gait at the constant stiffness; excluded");
      continue;
    }
    const double cot_a = map.at(iv, a_index[iv])->cot;
    f.rows.push_back({s.v_at(iv), s.k_at(a_index[iv]), cot_a, c->cot, (c->cot - cot_a) / cot_a});
  }
  double sum = 0.0;
  for (const FamilyRow& r : f.rows) {
    sum += r.penalty;
    if (r.penalty > f.max_penalty || &r == &f.rows.front()) {
      f.max_penalty = r.penalty;
      f.argmax_speed = r.v;
    }
  }
  if (!f.rows.empty()) f.mean_penalty = sum / f.rows.size();
  return f;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("spearman: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace hopper
