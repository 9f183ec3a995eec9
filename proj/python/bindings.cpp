// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

// Python bindings: model evaluation, single solves, warm start, grid
// exploration and family extraction.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>

#include "hopper/csv.hpp"
#include "hopper/explorer.hpp"
#include "hopper/params.hpp"

namespace py = pybind11;
using namespace hopper;

namespace {

State state_from(const Vec10& x) { return State::from_stacked(x); }

py::dict reintegration_dict(const Gait& g, const ModelParams& p) {
  const ReintegrationReport r = reintegrate(g, p);
  py::dict d;
  d["terminal_error"] = r.terminal_error;
  d["periodicity_residual"] = r.periodicity_residual;
  d["t_stance"] = r.stride.stance.event_time;
  d["t_flight"] = r.stride.flight.event_time;
  return d;
}

Gait solve_fixed(const Gait& start, double v, double k, int segments, const BoundsConfig& bounds,
                 const ModelParams& p) {
  if (!(v > 0) || !(k > 0)) throw DomainError("speed and stiffness must be positive");
  nlp::Vector a = resample(start, segments, p);
  const StrideLayout L{segments};
  for (Phase ph : {Phase::kStance, Phase::kFlight})
    for (int j = 0; j < L.nodes_per_phase(); ++j) a[L.offset(ph, j) + node::kK] = k;
  const GaitNlp problem(v, StiffnessMode::fixed(k), segments, bounds, p);
  py::gil_scoped_release release;
  return make_gait(problem, nlp::solve(problem, a), "python");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Energy-optimal hopping gaits of a monoped with parallel-elastic actuation";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StorageError>(m, "StorageError", PyExc_OSError);
  py::register_exception<ExplorationError>(m, "ExplorationError", PyExc_RuntimeError);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_static("parse", &ModelParams::parse)
      .def("to_dict", &ModelParams::to_map)
      .def("to_text", &ModelParams::to_text)
      .def_readwrite("k_alpha", &ModelParams::k_alpha)
      .def_readwrite("r_f", &ModelParams::r_f)
      .def_readwrite("l0", &ModelParams::l0)
      .def_readwrite("g", &ModelParams::g)
      .def("total_mass", &ModelParams::total_mass);

  py::class_<BoundsConfig>(m, "BoundsConfig")
      .def(py::init<>())
      .def_static("parse", &BoundsConfig::parse)
      .def("to_text", &BoundsConfig::to_text)
      .def("hash", &BoundsConfig::hash)
      .def_readwrite("dt_min", &BoundsConfig::dt_min)
      .def_readwrite("dt_max", &BoundsConfig::dt_max)
      .def_readwrite("k_min", &BoundsConfig::k_min)
      .def_readwrite("k_max", &BoundsConfig::k_max);

  // Model, on stacked states x = [q, qdot].
  m.def(
      "stance_dynamics",
      [](const Vec10& x, double tau, double force, double k, const ModelParams& p) {
        const auto d = stance_dynamics(state_from(x), {tau, force}, k, p);
        return std::pair<Vec10, Vec2>{d.xdot, d.lambda};
      },
      py::arg("x"), py::arg("tau"), py::arg("force"), py::arg("k_l"), py::arg("params") = ModelParams{},
      "State derivative and contact force during stance.");
  m.def(
      "flight_dynamics",
      [](const Vec10& x, double tau, double force, double k, const ModelParams& p) {
        return flight_dynamics(state_from(x), {tau, force}, k, p);
      },
      py::arg("x"), py::arg("tau"), py::arg("force"), py::arg("k_l"), py::arg("params") = ModelParams{});
  m.def(
      "impact_map", [](const Vec10& x, const ModelParams& p) { return impact_map(state_from(x), p).post.stacked(); },
      py::arg("x"), py::arg("params") = ModelParams{});
  m.def(
      "contact_jacobian", [](const Vec10& x, const ModelParams& p) {
        const State s = state_from(x);
        return Mat25(contact_jacobian(s.q, s.qdot, p).W);
      },
      py::arg("x"), py::arg("params") = ModelParams{});
  m.def(
      "kinetic_energy", [](const Vec10& x, const ModelParams& p) { return kinetic_energy(state_from(x), p); },
      py::arg("x"), py::arg("params") = ModelParams{});
  m.def(
      "running_cost", [](double tau, double force, const ModelParams& p) { return running_cost({tau, force}, p); },
      py::arg("tau"), py::arg("force"), py::arg("params") = ModelParams{});

  py::enum_<nlp::SolveStatus>(m, "SolveStatus")
      .value("CONVERGED", nlp::SolveStatus::kConverged)
      .value("MAX_ITER", nlp::SolveStatus::kMaxIter)
      .value("INFEASIBLE", nlp::SolveStatus::kInfeasible)
      .value("NUMERICAL_FAILURE", nlp::SolveStatus::kNumericalFailure);

  py::class_<Gait>(m, "Gait")
      .def_readonly("segments", &Gait::segments)
      .def_readonly("decision", &Gait::decision)
      .def_readonly("v_avg", &Gait::v_avg)
      .def_readonly("k_l", &Gait::k_l)
      .def_readonly("t_stance", &Gait::t_stance)
      .def_readonly("t_flight", &Gait::t_flight)
      .def_readonly("cot", &Gait::cot)
      .def_readonly("free_stiffness", &Gait::free_stiffness)
      .def_readonly("status", &Gait::status)
      .def_readonly("iterations", &Gait::iterations)
      .def_readonly("feasibility", &Gait::feasibility)
      .def_readonly("provenance", &Gait::provenance)
      .def_readonly("bounds_hash", &Gait::bounds_hash)
      .def("to_json", &Gait::to_json)
      .def_static("from_json", &Gait::from_json)
      .def("save", &Gait::save)
      .def_static("load", &Gait::load)
      .def("__repr__", [](const Gait& g) {
        return "Gait(v_avg=" + format12(g.v_avg) + ", k_l=" + format12(g.k_l) + ", cot=" + format12(g.cot) + ")";
      });

  m.def("gait_residual", &gait_residual, py::arg("gait"), py::arg("bounds") = BoundsConfig{},
        py::arg("params") = ModelParams{});
  m.def("reintegrate", &reintegration_dict, py::arg("gait"), py::arg("params") = ModelParams{});
  m.def("solve_fixed", &solve_fixed, py::arg("start"), py::arg("v_avg"), py::arg("k_l"), py::arg("segments") = 30,
        py::arg("bounds") = BoundsConfig{}, py::arg("params") = ModelParams{},
        "Fixed-stiffness solve started from another gait (resampled to `segments`).");

  m.def(
      "warm_start",
      [](double v, int n_seeds, int segments, std::uint64_t rng_seed, const BoundsConfig& bounds,
         const ModelParams& p) {
        WarmStartOptions o;
        o.n_seeds = n_seeds;
        o.segments = segments;
        o.rng_seed = rng_seed;
        o.bounds = bounds;
        py::gil_scoped_release release;
        return warm_start(v, o, p).best;
      },
      py::arg("v_avg"), py::arg("n_seeds") = 10, py::arg("segments") = 30, py::arg("rng_seed") = 1,
      py::arg("bounds") = BoundsConfig{}, py::arg("params") = ModelParams{},
      "Lowest-CoT free-stiffness gait over the seeds.");

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](double k_min, double k_max, double dk, double v_min, double v_max, double dv) {
             GridSpec g{k_min, k_max, dk, v_min, v_max, dv};
             g.validate();
             return g;
           }),
           py::arg("k_min") = 1.0, py::arg("k_max") = 13.0, py::arg("dk") = 0.5, py::arg("v_min") = 0.2,
           py::arg("v_max") = 1.4, py::arg("dv") = 0.1)
      .def_static("fine", &GridSpec::fine)
      .def_static("desk", &GridSpec::desk)
      .def_property_readonly("nk", &GridSpec::nk)
      .def_property_readonly("nv", &GridSpec::nv)
      .def("k_at", &GridSpec::k_at)
      .def("v_at", &GridSpec::v_at);

  py::class_<GaitMap>(m, "GaitMap")
      .def_readonly("spec", &GaitMap::spec)
      .def_readonly("segments", &GaitMap::segments)
      .def_readonly("steps_done", &GaitMap::steps_done)
      .def_readonly("complete", &GaitMap::complete)
      .def("solved_count", &GaitMap::solved_count)
      .def("at", &GaitMap::at)
      .def("cot_grid", [](const GaitMap& map) {
        // nv x nk array of CoT values, NaN where unsolved.
        Eigen::MatrixXd out(map.spec.nv(), map.spec.nk());
        for (int iv = 0; iv < map.spec.nv(); ++iv)
          for (int ik = 0; ik < map.spec.nk(); ++ik)
            out(iv, ik) = map.at(iv, ik) ? map.at(iv, ik)->cot : std::numeric_limits<double>::quiet_NaN();
        return out;
      });

  m.def(
      "explore_grid",
      [](const Gait& g0, const GridSpec& spec, int segments, std::optional<std::filesystem::path> directory,
         int threads, std::optional<int> max_steps, const BoundsConfig& bounds, const ModelParams& p) {
        ExploreOptions o;
        o.segments = segments;
        o.directory = std::move(directory);
        o.threads = threads;
        o.max_steps = max_steps;
        o.bounds = bounds;
        py::gil_scoped_release release;
        return explore_grid(g0, spec, p, o);
      },
      py::arg("g0"), py::arg("spec") = GridSpec::desk(), py::arg("segments") = 20, py::arg("directory") = py::none(),
      py::arg("threads") = 1, py::arg("max_steps") = py::none(), py::arg("bounds") = BoundsConfig{},
      py::arg("params") = ModelParams{});
  m.def("load_map", &load_map, py::arg("directory"));

  py::class_<FamilyRow>(m, "FamilyRow")
      .def_readonly("v", &FamilyRow::v)
      .def_readonly("k_a", &FamilyRow::k_a)
      .def_readonly("cot_a", &FamilyRow::cot_a)
      .def_readonly("cot_c", &FamilyRow::cot_c)
      .def_readonly("penalty", &FamilyRow::penalty);
  py::class_<Families>(m, "Families")
      .def_readonly("k_bar", &Families::k_bar)
      .def_readonly("rows", &Families::rows)
      .def_readonly("a_speeds", &Families::a_speeds)
      .def_readonly("a_stiffness", &Families::a_stiffness)
      .def_readonly("max_penalty", &Families::max_penalty)
      .def_readonly("argmax_speed", &Families::argmax_speed)
      .def_readonly("mean_penalty", &Families::mean_penalty)
      .def_readonly("warnings", &Families::warnings);
  m.def("extract_families", &extract_families, py::arg("map"));
  m.def("spearman", &spearman, py::arg("x"), py::arg("y"));
}
