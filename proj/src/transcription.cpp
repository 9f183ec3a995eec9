// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hopper/keyvalue.hpp"
#include "node_kernels.hpp"

namespace hopper {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using detail::kZ;
using detail::kZColumns;

// ---------------------------------------------------------------------------
// Sparse assembly with a fixed emission order.

struct RecordSink {
  std::vector<Eigen::Triplet<double>> entries;
  void operator()(int row, int col, double) { entries.emplace_back(row, col, 1.0); }
};

struct ValueSink {
  const std::vector<int>& slot;
  double* values;
  std::size_t next = 0;
  void operator()(int, int, double v) { values[slot[next++]] += v; }
};

// Lower-triangle adapter for Hessian emission.
template <typename Sink>
struct LowerSink {
  Sink& sink;
  /// Pure second derivative d^2/(di di).
  void diag(int i, double v) { sink(i, i, v); }
  /// Symmetric pair contribution v (e_i e_j^T + e_j e_i^T).
  void sym(int i, int j, double v) {
    if (i == j) {
      sink(i, i, 2.0 * v);
    } else {
      sink(std::max(i, j), std::min(i, j), v);
    }
  }
  /// Entry (i, j) of a symmetric matrix block, i >= j in the block ordering.
  void entry(int i, int j, double v) { sink(std::max(i, j), std::min(i, j), v); }
};

}  // namespace

struct GaitNlp::Pattern {
  nlp::SparseMatrix structure;
  std::vector<int> slot;

  static std::shared_ptr<const Pattern> from(const std::vector<Eigen::Triplet<double>>& entries, int rows, int cols) {
    auto pat = std::make_shared<Pattern>();
    pat->structure.resize(rows, cols);
    pat->structure.setFromTriplets(entries.begin(), entries.end());
    pat->structure.makeCompressed();
    const int* outer = pat->structure.outerIndexPtr();
    const int* inner = pat->structure.innerIndexPtr();
    pat->slot.reserve(entries.size());
    for (const auto& t : entries) {
      const int* first = inner + outer[t.col()];
      const int* last = inner + outer[t.col() + 1];
      const int* pos = std::lower_bound(first, last, t.row());
      pat->slot.push_back(static_cast<int>(pos - inner));
    }
    std::fill(pat->structure.valuePtr(), pat->structure.valuePtr() + pat->structure.nonZeros(), 0.0);
    return pat;
  }
};

// ---------------------------------------------------------------------------
// Bounds

void BoundsConfig::validate() const {
  const auto check = [](bool ok, const char* what) {
    if (!ok) throw ConstructionError(std::string("invalid bounds: ") + what);
  };
  check(tau_max > 0 && force_max > 0, "input limits must be positive");
  check(leg_min > 0 && leg_max > leg_min, "leg range");
  check(alpha_max > 0 && phi_max > 0, "angle limits must be positive");
  check(y_max > y_min, "height range");
  check(dt_min > 0 && dt_max > dt_min, "segment duration range");
  check(k_min > 0 && k_max > k_min, "stiffness range");
}

namespace {

const std::vector<std::pair<const char*, double BoundsConfig::*>>& bounds_fields() {
  static const std::vector<std::pair<const char*, double BoundsConfig::*>> f = {
      {"tau_max", &BoundsConfig::tau_max},     {"force_max", &BoundsConfig::force_max},
      {"leg_min", &BoundsConfig::leg_min},     {"leg_max", &BoundsConfig::leg_max},
      {"alpha_max", &BoundsConfig::alpha_max}, {"phi_max", &BoundsConfig::phi_max},
      {"y_min", &BoundsConfig::y_min},         {"y_max", &BoundsConfig::y_max},
      {"dt_min", &BoundsConfig::dt_min},       {"dt_max", &BoundsConfig::dt_max},
      {"k_min", &BoundsConfig::k_min},         {"k_max", &BoundsConfig::k_max},
  };
  return f;
}

}  // namespace

std::string BoundsConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& [name, field] : bounds_fields()) os << name << " = " << this->*field << "\n";
  return os.str();
}

BoundsConfig BoundsConfig::parse(const std::string& text) {
  BoundsConfig b;
  for (const auto& [key, value] : parse_key_values(text)) {
    bool found = false;
    for (const auto& [name, field] : bounds_fields()) {
      if (key == name) {
        b.*field = parse_double(key, value);
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown bounds key '" + key + "'");
  }
  b.validate();
  return b;
}

std::string BoundsConfig::hash() const {
  // FNV-1a over the canonical text form.
  std::uint64_t h = 1469598103934665603ull;
  for (const char ch : to_text()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Segment-level operations

Lifted lifted_dynamics(const NodeVector& nd, Phase phase, const ModelParams& p) {
  const auto val = detail::eval_node(phase, nd.data(), p);
  Lifted f = Lifted::Zero();
  f.head<5>() = nd.segment<5>(5);
  for (int i = 0; i < 5; ++i) f[5 + i] = val.qdd[i];
  f.segment<2>(10) = nd.segment<2>(node::kV);
  return f;
}

DefectVector hermite_defect_blocks(const NodeVector& a, const NodeVector& m, const NodeVector& b, const Lifted& f_a,
                                   const Lifted& f_m, const Lifted& f_b) {
  const double dt = a[node::kDt];
  const Lifted y_a = a.head<node::kLifted>();
  const Lifted y_m = m.head<node::kLifted>();
  const Lifted y_b = b.head<node::kLifted>();
  DefectVector r;
  r.segment<14>(0) = y_m - 0.5 * (y_a + y_b) - (dt / 8.0) * (f_a - f_b);
  r.segment<14>(14) = f_m - (1.5 / dt) * (y_b - y_a) + 0.25 * (f_a + f_b);
  r.segment<2>(28) = m.segment<2>(node::kV) - 0.5 * (a.segment<2>(node::kV) + b.segment<2>(node::kV));
  return r;
}

DefectVector hermite_defects(const NodeVector& a, const NodeVector& m, const NodeVector& b, Phase phase,
                             const ModelParams& p) {
  if (!(a[node::kDt] > 0.0)) throw DomainError("segment duration must be positive");
  return hermite_defect_blocks(a, m, b, lifted_dynamics(a, phase, p), lifted_dynamics(m, phase, p),
                               lifted_dynamics(b, phase, p));
}

double simpson_cost(const std::vector<NodeVector>& nodes, const ModelParams& p) {
  if (nodes.size() < 3 || nodes.size() % 2 == 0) throw DomainError("simpson_cost needs 2N+1 nodes");
  const auto w = [&](const NodeVector& nd) { return running_cost({nd[node::kU], nd[node::kU + 1]}, p); };
  double total = 0.0;
  for (std::size_t k = 0; k + 2 < nodes.size(); k += 2) {
    const double dt = nodes[k][node::kDt];
    if (!(dt > 0.0)) throw DomainError("segment duration must be positive");
    total += dt / 6.0 * (w(nodes[k]) + 4.0 * w(nodes[k + 1]) + w(nodes[k + 2]));
  }
  return total;
}

std::vector<NodeVector> StrideLayout::phase_nodes(const nlp::Vector& a, Phase phase) const {
  std::vector<NodeVector> out;
  out.reserve(nodes_per_phase());
  for (int j = 0; j < nodes_per_phase(); ++j) out.push_back(node(a, phase, j));
  return out;
}

std::string ProblemStats::to_json() const {
  std::ostringstream os;
  os << "{\"variables\": " << variables << ", \"equalities\": " << equalities << ", \"inequalities\": "
     << inequalities << ", \"jacobian_nonzeros\": " << jacobian_nonzeros << ", \"hessian_nonzeros\": "
     << hessian_nonzeros << ", \"jacobian_density\": " << jacobian_density << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// GaitNlp

GaitNlp::GaitNlp(double v_avg, StiffnessMode stiffness, int segments, const BoundsConfig& bounds,
                 const ModelParams& p)
    : v_avg_(v_avg), stiffness_(stiffness), layout_{segments}, bounds_(bounds), p_(p) {
  if (segments < 2) throw ConstructionError("need at least 2 segments per phase");
  if (!(v_avg > 0.0) || !std::isfinite(v_avg)) throw ConstructionError("average speed must be positive");
  if (stiffness.is_fixed() && !(stiffness.value > 0.0)) throw ConstructionError("fixed stiffness must be positive");
  bounds.validate();
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConstructionError(e.what());
  }

  const int n = layout_.size();
  default_lo_ = nlp::Vector::Constant(n, -kInf);
  default_hi_ = nlp::Vector::Constant(n, kInf);
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    for (int j = 0; j < layout_.nodes_per_phase(); ++j) {
      const int o = layout_.offset(ph, j);
      const auto box = [&](int i, double lo, double hi) {
        default_lo_[o + i] = lo;
        default_hi_[o + i] = hi;
      };
      box(kY, bounds.y_min, bounds.y_max);
      box(kPhi, -bounds.phi_max, bounds.phi_max);
      box(kAlpha, -bounds.alpha_max, bounds.alpha_max);
      box(kLeg, bounds.leg_min, bounds.leg_max);
      box(node::kU, -bounds.tau_max, bounds.tau_max);
      box(node::kU + 1, -bounds.force_max, bounds.force_max);
      box(node::kDt, bounds.dt_min, bounds.dt_max);
      box(node::kK, bounds.k_min, bounds.k_max);
    }
  }
  a_lo_ = default_lo_;
  a_hi_ = default_hi_;

  int row = 2 * segments * 30;
  row_liftoff_ = row++;
  row_link_ = row;
  row += 10;
  row_kcont_ = row++;
  row_touchdown_ = row++;
  row_periodic_ = row;
  row += 10;
  row_speed_ = row++;
  if (stiffness.is_fixed()) row_fixed_ = row++;
  num_equalities_ = row;
  row_ineq_ = row;
  row += layout_.nodes_per_phase();
  c_lo_ = nlp::Vector::Zero(row);
  c_hi_ = nlp::Vector::Zero(row);
  c_hi_.tail(layout_.nodes_per_phase()).setConstant(kInf);

  // Structural passes: emission order is value independent.
  const nlp::Vector probe = (default_lo_.cwiseMax(-1.0) + default_hi_.cwiseMin(1.0)) * 0.5;
  RecordSink jac;
  emit_jacobian(probe, jac);
  jac_pattern_ = Pattern::from(jac.entries, num_constraints(), n);
  RecordSink hess;
  emit_hessian(probe, 1.0, nlp::Vector::Ones(num_constraints()), hess);
  hess_pattern_ = Pattern::from(hess.entries, n, n);
}

std::unique_ptr<GaitNlp> build_nlp(double v_avg, StiffnessMode stiffness, int segments, const BoundsConfig& bounds,
                                   const ModelParams& p) {
  return std::make_unique<GaitNlp>(v_avg, stiffness, segments, bounds, p);
}

void GaitNlp::set_variable_bounds(const nlp::Vector& lower, const nlp::Vector& upper) {
  if (lower.size() != num_variables() || upper.size() != num_variables()) {
    throw std::invalid_argument("bounds size mismatch");
  }
  a_lo_ = lower;
  a_hi_ = upper;
}

void GaitNlp::reset_variable_bounds() {
  a_lo_ = default_lo_;
  a_hi_ = default_hi_;
}

nlp::Vector GaitNlp::variable_scale() const {
  nlp::Vector s = nlp::Vector::Ones(num_variables());
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    for (int j = 0; j < layout_.nodes_per_phase(); ++j) s[layout_.offset(ph, j) + node::kDt] = 0.05;
  }
  return s;
}

std::string GaitNlp::variable_name(int i) const {
  static const char* fields[node::kSize] = {"x",   "y",  "phi", "alpha", "l",  "xd", "yd", "phid",
                                            "alphad", "ld", "tau", "f",  "dt", "k",  "v_tau", "v_f"};
  const int ps = layout_.phase_size();
  const char* phase = i < ps ? "S" : "F";
  const int local = i % ps;
  return std::string(phase) + "[" + std::to_string(local / node::kSize) + "]." + fields[local % node::kSize];
}

std::string GaitNlp::constraint_name(int i) const {
  const int seg_rows = layout_.segments * 30;
  if (i < 2 * seg_rows) {
    const char* phase = i < seg_rows ? "defect_stance" : "defect_flight";
    const int local = i % seg_rows;
    return std::string(phase) + "[" + std::to_string(local / 30) + "]." + std::to_string(local % 30);
  }
  if (i == row_liftoff_) return "liftoff";
  if (i >= row_link_ && i < row_link_ + 10) return "link[" + std::to_string(i - row_link_) + "]";
  if (i == row_kcont_) return "k_continuity";
  if (i == row_touchdown_) return "touchdown";
  if (i >= row_periodic_ && i < row_periodic_ + 10) return "periodicity[" + std::to_string(i - row_periodic_) + "]";
  if (i == row_speed_) return "speed";
  if (i == row_fixed_) return "fixed_k";
  return "contact_force[" + std::to_string(i - row_ineq_) + "]";
}

double GaitNlp::objective(const nlp::Vector& a) const {
  double cost = 0.0;
  for (Phase ph : {Phase::kStance, Phase::kFlight}) cost += simpson_cost(layout_.phase_nodes(a, ph), p_);
  const double dx =
      v_avg_ * layout_.segments * (a[layout_.offset(Phase::kStance, 0) + node::kDt] + a[layout_.offset(Phase::kFlight, 0) + node::kDt]);
  return cost / (p_.total_mass() * p_.g * dx);
}

namespace {

struct CostWeights {
  double k_tau, k_force;
};

CostWeights cost_weights(const ModelParams& p) {
  const double m = p.total_mass();
  return {1.0 / (m * std::sqrt(p.g * p.l0 * p.l0 * p.l0)), 1.0 / (m * std::sqrt(p.g / p.l0))};
}

}  // namespace

nlp::Vector GaitNlp::objective_gradient(const nlp::Vector& a) const {
  const auto kw = cost_weights(p_);
  const double mg = p_.total_mass() * p_.g;
  const int dS = layout_.offset(Phase::kStance, 0) + node::kDt;
  const int dF = layout_.offset(Phase::kFlight, 0) + node::kDt;
  const double dxdt = v_avg_ * layout_.segments;
  const double dx = dxdt * (a[dS] + a[dF]);
  nlp::Vector grad = nlp::Vector::Zero(num_variables());
  double cost = 0.0;
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    for (int s = 0; s < layout_.segments; ++s) {
      const int oa = layout_.offset(ph, 2 * s);
      const double dt = a[oa + node::kDt];
      double sum = 0.0;
      for (int q = 0; q < 3; ++q) {
        const int o = layout_.offset(ph, 2 * s + q);
        const double wt = q == 1 ? 4.0 : 1.0;
        const double tau = a[o + node::kU], f = a[o + node::kU + 1];
        sum += wt * (kw.k_tau * tau * tau + kw.k_force * f * f);
        grad[o + node::kU] += dt / 6.0 * wt * 2.0 * kw.k_tau * tau;
        grad[o + node::kU + 1] += dt / 6.0 * wt * 2.0 * kw.k_force * f;
      }
      grad[oa + node::kDt] += sum / 6.0;
      cost += dt / 6.0 * sum;
    }
  }
  grad /= mg * dx;
  const double d_dx = -cost / (mg * dx * dx) * dxdt;
  grad[dS] += d_dx;
  grad[dF] += d_dx;
  return grad;
}

nlp::Vector GaitNlp::constraints(const nlp::Vector& a) const {
  nlp::Vector c = nlp::Vector::Zero(num_constraints());
  const int npp = layout_.nodes_per_phase();
  std::vector<detail::NodeValue> stance_vals(npp);
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    std::vector<Lifted> F(npp);
    for (int j = 0; j < npp; ++j) {
      const int o = layout_.offset(ph, j);
      const auto v = detail::eval_node(ph, a.data() + o, p_);
      if (ph == Phase::kStance) stance_vals[j] = v;
      F[j].setZero();
      F[j].head<5>() = a.segment<5>(o + 5);
      for (int i = 0; i < 5; ++i) F[j][5 + i] = v.qdd[i];
      F[j].segment<2>(10) = a.segment<2>(o + node::kV);
    }
    const int base = (ph == Phase::kStance ? 0 : layout_.segments * 30);
    for (int s = 0; s < layout_.segments; ++s) {
      c.segment<30>(base + 30 * s) =
          hermite_defect_blocks(layout_.node(a, ph, 2 * s), layout_.node(a, ph, 2 * s + 1),
                                layout_.node(a, ph, 2 * s + 2), F[2 * s], F[2 * s + 1], F[2 * s + 2]);
    }
  }
  const int sL = layout_.offset(Phase::kStance, npp - 1);
  const int s0 = layout_.offset(Phase::kStance, 0);
  const int f0 = layout_.offset(Phase::kFlight, 0);
  const int fL = layout_.offset(Phase::kFlight, npp - 1);

  c[row_liftoff_] = stance_vals[npp - 1].lambda_y;
  c.segment<10>(row_link_) = a.segment<10>(f0) - a.segment<10>(sL);
  c[row_kcont_] = a[s0 + node::kK] - a[f0 + node::kK];
  {
    const Vec5 q = a.segment<5>(fL);
    c[row_touchdown_] = q[kY] - q[kLeg] * std::cos(q[kPhi] + q[kAlpha]) - p_.r_f;
  }
  {
    std::array<double, detail::kImpactZ> z;
    for (int i = 0; i < 3; ++i) z[i] = a[fL + 2 + i];
    for (int i = 0; i < 5; ++i) z[3 + i] = a[fL + 5 + i];
    const auto plus = detail::impact_velocity(z, p_);
    c[row_periodic_] = a[s0];
    for (int i = 1; i < 5; ++i) c[row_periodic_ + i] = a[s0 + i] - a[fL + i];
    for (int i = 0; i < 5; ++i) c[row_periodic_ + 5 + i] = a[s0 + 5 + i] - plus[i];
  }
  c[row_speed_] = v_avg_ * layout_.segments * (a[s0 + node::kDt] + a[f0 + node::kDt]) - a[fL];
  if (row_fixed_ >= 0) c[row_fixed_] = a[s0 + node::kK] - stiffness_.value;
  for (int j = 0; j < npp; ++j) c[row_ineq_ + j] = stance_vals[j].lambda_y;
  return c;
}

template <typename Sink>
void GaitNlp::emit_jacobian(const nlp::Vector& a, Sink& sink) const {
  const int npp = layout_.nodes_per_phase();
  std::vector<detail::NodeDerivative> stance_der(npp);

  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    std::vector<detail::NodeDerivative> der(npp);
    std::vector<Lifted> F(npp);
    for (int j = 0; j < npp; ++j) {
      const int o = layout_.offset(ph, j);
      der[j] = detail::eval_node_derivative(ph, a.data() + o, p_);
      F[j].setZero();
      F[j].head<5>() = a.segment<5>(o + 5);
      for (int i = 0; i < 5; ++i) F[j][5 + i] = der[j].qdd[i];
      F[j].segment<2>(10) = a.segment<2>(o + node::kV);
    }
    if (ph == Phase::kStance) stance_der = der;

    // d F[r] / d(node vars), scaled, emitted into `row`.
    const auto emit_dF = [&](int row, int r, int node_offset, const detail::NodeDerivative& d, double scale) {
      if (r < 5) {
        sink(row, node_offset + 5 + r, scale);
      } else if (r < 10) {
        for (int i = 0; i < kZ; ++i) sink(row, node_offset + kZColumns[i], scale * d.jac[r - 5][i]);
      } else if (r < 12) {
        sink(row, node_offset + node::kV + (r - 10), scale);
      }
    };

    const int base = (ph == Phase::kStance ? 0 : layout_.segments * 30);
    for (int s = 0; s < layout_.segments; ++s) {
      const int ja = 2 * s, jm = 2 * s + 1, jb = 2 * s + 2;
      const int oa = layout_.offset(ph, ja), om = layout_.offset(ph, jm), ob = layout_.offset(ph, jb);
      const double dt = a[oa + node::kDt];
      for (int r = 0; r < 14; ++r) {
        const int row = base + 30 * s + r;
        sink(row, om + r, 1.0);
        sink(row, oa + r, -0.5);
        sink(row, ob + r, -0.5);
        emit_dF(row, r, oa, der[ja], -dt / 8.0);
        emit_dF(row, r, ob, der[jb], dt / 8.0);
        sink(row, oa + node::kDt, -(F[ja][r] - F[jb][r]) / 8.0);
      }
      for (int r = 0; r < 14; ++r) {
        const int row = base + 30 * s + 14 + r;
        emit_dF(row, r, om, der[jm], 1.0);
        sink(row, oa + r, 1.5 / dt);
        sink(row, ob + r, -1.5 / dt);
        sink(row, oa + node::kDt, 1.5 * (a[ob + r] - a[oa + r]) / (dt * dt));
        emit_dF(row, r, oa, der[ja], 0.25);
        emit_dF(row, r, ob, der[jb], 0.25);
      }
      for (int r = 0; r < 2; ++r) {
        const int row = base + 30 * s + 28 + r;
        sink(row, om + node::kV + r, 1.0);
        sink(row, oa + node::kV + r, -0.5);
        sink(row, ob + node::kV + r, -0.5);
      }
    }
  }

  const int sL = layout_.offset(Phase::kStance, npp - 1);
  const int s0 = layout_.offset(Phase::kStance, 0);
  const int f0 = layout_.offset(Phase::kFlight, 0);
  const int fL = layout_.offset(Phase::kFlight, npp - 1);

  for (int i = 0; i < kZ; ++i) sink(row_liftoff_, sL + kZColumns[i], stance_der[npp - 1].jac[5][i]);
  for (int i = 0; i < 10; ++i) {
    sink(row_link_ + i, f0 + i, 1.0);
    sink(row_link_ + i, sL + i, -1.0);
  }
  sink(row_kcont_, s0 + node::kK, 1.0);
  sink(row_kcont_, f0 + node::kK, -1.0);
  {
    const double th = a[fL + kPhi] + a[fL + kAlpha];
    const double l = a[fL + kLeg];
    sink(row_touchdown_, fL + kY, 1.0);
    sink(row_touchdown_, fL + kPhi, l * std::sin(th));
    sink(row_touchdown_, fL + kAlpha, l * std::sin(th));
    sink(row_touchdown_, fL + kLeg, -std::cos(th));
  }
  {
    using D = ad::Dual<double, detail::kImpactZ>;
    std::array<D, detail::kImpactZ> z;
    for (int i = 0; i < 3; ++i) z[i] = ad::variable<detail::kImpactZ>(a[fL + 2 + i], i);
    for (int i = 0; i < 5; ++i) z[3 + i] = ad::variable<detail::kImpactZ>(a[fL + 5 + i], 3 + i);
    const auto plus = detail::impact_velocity(z, p_);
    sink(row_periodic_, s0, 1.0);
    for (int i = 1; i < 5; ++i) {
      sink(row_periodic_ + i, s0 + i, 1.0);
      sink(row_periodic_ + i, fL + i, -1.0);
    }
    for (int i = 0; i < 5; ++i) {
      const int row = row_periodic_ + 5 + i;
      sink(row, s0 + 5 + i, 1.0);
      for (int j = 0; j < 3; ++j) sink(row, fL + 2 + j, -plus[i].d[j]);
      for (int j = 0; j < 5; ++j) sink(row, fL + 5 + j, -plus[i].d[3 + j]);
    }
  }
  sink(row_speed_, s0 + node::kDt, v_avg_ * layout_.segments);
  sink(row_speed_, f0 + node::kDt, v_avg_ * layout_.segments);
  sink(row_speed_, fL, -1.0);
  if (row_fixed_ >= 0) sink(row_fixed_, s0 + node::kK, 1.0);
  for (int j = 0; j < npp; ++j) {
    const int o = layout_.offset(Phase::kStance, j);
    for (int i = 0; i < kZ; ++i) sink(row_ineq_ + j, o + kZColumns[i], stance_der[j].jac[5][i]);
  }
}

template <typename Sink>
void GaitNlp::emit_hessian(const nlp::Vector& a, double sigma, const nlp::Vector& y, Sink& raw) const {
  LowerSink<Sink> sink{raw};
  const int npp = layout_.nodes_per_phase();
  const auto kw = cost_weights(p_);
  const double mg = p_.total_mass() * p_.g;
  const int dS = layout_.offset(Phase::kStance, 0) + node::kDt;
  const int dF = layout_.offset(Phase::kFlight, 0) + node::kDt;
  const double dxdt = v_avg_ * layout_.segments;
  const double dx = dxdt * (a[dS] + a[dF]);

  // Objective: f = C / (mg dx) with C the Simpson sum.
  double cost = 0.0;
  std::vector<std::pair<int, double>> grad_c;  // nonzeros of dC/da
  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    std::vector<double> coeff(npp, 0.0);  // sum of dt * weight / 6 per node
    for (int s = 0; s < layout_.segments; ++s) {
      const int oa = layout_.offset(ph, 2 * s);
      const double dt = a[oa + node::kDt];
      double sum = 0.0;
      for (int q = 0; q < 3; ++q) {
        const int o = layout_.offset(ph, 2 * s + q);
        const double wt = q == 1 ? 4.0 : 1.0;
        const double tau = a[o + node::kU], f = a[o + node::kU + 1];
        sum += wt * (kw.k_tau * tau * tau + kw.k_force * f * f);
        coeff[2 * s + q] += dt * wt / 6.0;
        // d^2 C / (d dt_a d u)
        sink.sym(oa + node::kDt, o + node::kU, sigma / (mg * dx) * wt / 6.0 * 2.0 * kw.k_tau * tau);
        sink.sym(oa + node::kDt, o + node::kU + 1, sigma / (mg * dx) * wt / 6.0 * 2.0 * kw.k_force * f);
      }
      cost += dt / 6.0 * sum;
      grad_c.emplace_back(oa + node::kDt, sum / 6.0);
    }
    for (int j = 0; j < npp; ++j) {
      const int o = layout_.offset(ph, j);
      sink.diag(o + node::kU, sigma / (mg * dx) * coeff[j] * 2.0 * kw.k_tau);
      sink.diag(o + node::kU + 1, sigma / (mg * dx) * coeff[j] * 2.0 * kw.k_force);
      grad_c.emplace_back(o + node::kU, coeff[j] * 2.0 * kw.k_tau * a[o + node::kU]);
      grad_c.emplace_back(o + node::kU + 1, coeff[j] * 2.0 * kw.k_force * a[o + node::kU + 1]);
    }
  }
  // -(G D^T + D G^T) / (mg dx^2) + 2 C D D^T / (mg dx^3)
  for (const auto& [idx, g] : grad_c) {
    sink.sym(idx, dS, -sigma * g * dxdt / (mg * dx * dx));
    sink.sym(idx, dF, -sigma * g * dxdt / (mg * dx * dx));
  }
  const double dd = sigma * 2.0 * cost * dxdt * dxdt / (mg * dx * dx * dx);
  sink.diag(dS, dd);
  sink.diag(dF, dd);
  sink.entry(dF, dS, dd);

  // Constraint curvature.
  std::vector<std::array<double, 5>> w_stance(npp), w_flight(npp);
  std::vector<double> mu(npp, 0.0);
  mu[npp - 1] += y[row_liftoff_];
  for (int j = 0; j < npp; ++j) mu[j] += y[row_ineq_ + j];

  for (Phase ph : {Phase::kStance, Phase::kFlight}) {
    auto& w = ph == Phase::kStance ? w_stance : w_flight;
    for (auto& wi : w) wi.fill(0.0);
    const int base = (ph == Phase::kStance ? 0 : layout_.segments * 30);

    std::vector<detail::NodeDerivative> der(npp);
    for (int j = 0; j < npp; ++j) der[j] = detail::eval_node_derivative(ph, a.data() + layout_.offset(ph, j), p_);

    for (int s = 0; s < layout_.segments; ++s) {
      const int ja = 2 * s, jm = 2 * s + 1, jb = 2 * s + 2;
      const int oa = layout_.offset(ph, ja), ob = layout_.offset(ph, jb);
      const int D = oa + node::kDt;
      const double dt = a[D];
      const double* s1 = y.data() + base + 30 * s;
      const double* s2 = s1 + 14;
      for (int r = 0; r < 5; ++r) {
        w[ja][r] += -dt / 8.0 * s1[5 + r] + 0.25 * s2[5 + r];
        w[jb][r] += dt / 8.0 * s1[5 + r] + 0.25 * s2[5 + r];
        w[jm][r] += s2[5 + r];
      }
      // Block (i): d^2/(d dt d node) of -dt/8 s1^T (F_a - F_b).
      const auto emit_cross = [&](int node_offset, const detail::NodeDerivative& d, double scale) {
        for (int r = 0; r < 5; ++r) sink.sym(D, node_offset + 5 + r, scale * s1[r]);
        for (int i = 0; i < kZ; ++i) {
          double acc = 0.0;
          for (int r = 0; r < 5; ++r) acc += s1[5 + r] * d.jac[r][i];
          sink.sym(D, node_offset + kZColumns[i], scale * acc);
        }
        for (int r = 0; r < 2; ++r) sink.sym(D, node_offset + node::kV + r, scale * s1[10 + r]);
      };
      emit_cross(oa, der[ja], -1.0 / 8.0);
      emit_cross(ob, der[jb], 1.0 / 8.0);
      // Block (ii): -(3/(2 dt)) s2^T (y_b - y_a).
      double diag = 0.0;
      for (int r = 0; r < 14; ++r) {
        diag += s2[r] * (-3.0 * (a[ob + r] - a[oa + r]) / (dt * dt * dt));
        sink.sym(D, ob + r, s2[r] * 1.5 / (dt * dt));
        sink.sym(D, oa + r, -s2[r] * 1.5 / (dt * dt));
      }
      sink.diag(D, diag);
    }

    for (int j = 0; j < npp; ++j) {
      const int o = layout_.offset(ph, j);
      const double m = ph == Phase::kStance ? mu[j] : 0.0;
      const auto H = detail::node_weighted_hessian(ph, a.data() + o, w[j], m, p_);
      for (int i = 0; i < kZ; ++i)
        for (int k = 0; k <= i; ++k) sink.entry(o + kZColumns[i], o + kZColumns[k], H[i][k]);
    }
  }

  const int fL = layout_.offset(Phase::kFlight, npp - 1);
  {
    const double yt = y[row_touchdown_];
    const double th = a[fL + kPhi] + a[fL + kAlpha];
    const double l = a[fL + kLeg];
    const double hth = yt * l * std::cos(th);
    const double hl = yt * std::sin(th);
    sink.entry(fL + kPhi, fL + kPhi, hth);
    sink.entry(fL + kAlpha, fL + kPhi, hth);
    sink.entry(fL + kAlpha, fL + kAlpha, hth);
    sink.entry(fL + kLeg, fL + kPhi, hl);
    sink.entry(fL + kLeg, fL + kAlpha, hl);
  }
  {
    using D2 = ad::Dual<ad::Dual<double, detail::kImpactZ>, detail::kImpactZ>;
    std::array<D2, detail::kImpactZ> z;
    for (int i = 0; i < 3; ++i) z[i] = ad::variable2<detail::kImpactZ>(a[fL + 2 + i], i);
    for (int i = 0; i < 5; ++i) z[3 + i] = ad::variable2<detail::kImpactZ>(a[fL + 5 + i], 3 + i);
    const auto plus = detail::impact_velocity(z, p_);
    D2 acc(0.0);
    for (int i = 0; i < 5; ++i) acc += (-y[row_periodic_ + 5 + i]) * plus[i];
    const auto col = [&](int i) { return i < 3 ? fL + 2 + i : fL + 5 + (i - 3); };
    for (int i = 0; i < detail::kImpactZ; ++i)
      for (int k = 0; k <= i; ++k) sink.entry(col(i), col(k), acc.d[i].d[k]);
  }
}

nlp::SparseMatrix GaitNlp::jacobian(const nlp::Vector& a) const {
  nlp::SparseMatrix J = jac_pattern_->structure;
  ValueSink sink{jac_pattern_->slot, J.valuePtr()};
  emit_jacobian(a, sink);
  return J;
}

nlp::SparseMatrix GaitNlp::lagrangian_hessian(const nlp::Vector& a, double sigma, const nlp::Vector& y) const {
  nlp::SparseMatrix H = hess_pattern_->structure;
  ValueSink sink{hess_pattern_->slot, H.valuePtr()};
  emit_hessian(a, sigma, y, sink);
  return H;
}

double GaitNlp::max_violation(const nlp::Vector& a) const {
  const nlp::Vector c = constraints(a);
  double worst = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    worst = std::max({worst, c_lo_[i] - c[i], c[i] - c_hi_[i]});
    if (!std::isfinite(c[i])) return kInf;
  }
  for (int i = 0; i < a.size(); ++i) worst = std::max({worst, a_lo_[i] - a[i], a[i] - a_hi_[i]});
  return worst;
}

std::vector<std::vector<int>> GaitNlp::jacobian_row_support() const {
  std::vector<std::vector<int>> rows(num_constraints());
  const auto& S = jac_pattern_->structure;
  for (int col = 0; col < S.outerSize(); ++col) {
    for (nlp::SparseMatrix::InnerIterator it(S, col); it; ++it) rows[it.row()].push_back(col);
  }
  return rows;
}

ProblemStats GaitNlp::stats() const {
  ProblemStats s;
  s.variables = num_variables();
  s.equalities = num_equalities_;
  s.inequalities = num_inequalities();
  s.jacobian_nonzeros = static_cast<int>(jac_pattern_->structure.nonZeros());
  s.hessian_nonzeros = static_cast<int>(hess_pattern_->structure.nonZeros());
  s.jacobian_density = static_cast<double>(s.jacobian_nonzeros) / (static_cast<double>(s.variables) * num_constraints());
  return s;
}

}  // namespace hopper
