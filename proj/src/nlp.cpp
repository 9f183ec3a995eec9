// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#include "hopper/nlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

namespace hopper::nlp {

namespace {

double rel(double analytic, double fd) { return std::abs(analytic - fd) / std::max(1.0, std::abs(fd)); }

std::string block_of(const std::string& name) { return name.substr(0, name.find('[')); }

}  // namespace

DerivativeReport check_derivatives(const NlpProblem& problem, const Vector& point, double h, const Vector& y_in) {
  const int n = problem.num_variables();
  const int m = problem.num_constraints();
  const Vector y = y_in.size() == m ? y_in : Vector::Ones(m);
  DerivativeReport report;

  const Vector g = problem.objective_gradient(point);
  const Eigen::MatrixXd J = Eigen::MatrixXd(problem.jacobian(point));
  const SparseMatrix Js = problem.jacobian(point);
  const SparseMatrix Hl = problem.lagrangian_hessian(point, 1.0, y);
  const Eigen::MatrixXd Hlow = Eigen::MatrixXd(Hl);
  const Eigen::MatrixXd H = Hlow + Hlow.transpose() - Eigen::MatrixXd(Hlow.diagonal().asDiagonal());

  Eigen::MatrixXi in_pattern = Eigen::MatrixXi::Zero(m, n);
  for (int col = 0; col < Js.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(Js, col); it; ++it) in_pattern(it.row(), col) = 1;

  std::map<std::string, double> blocks;
  double worst_row_err = -1.0;
  Vector a = point;
  for (int j = 0; j < n; ++j) {
    const double step = h * std::max(1.0, std::abs(point[j]));
    a[j] = point[j] + step;
    const double fp = problem.objective(a);
    const Vector cp = problem.constraints(a);
    const Vector gp = problem.objective_gradient(a) + problem.jacobian(a).transpose() * y;
    a[j] = point[j] - step;
    const double fm = problem.objective(a);
    const Vector cm = problem.constraints(a);
    const Vector gm = problem.objective_gradient(a) + problem.jacobian(a).transpose() * y;
    a[j] = point[j];

    report.objective_gradient_error = std::max(report.objective_gradient_error, rel(g[j], (fp - fm) / (2 * step)));
    const Vector dc = (cp - cm) / (2 * step);
    for (int i = 0; i < m; ++i) {
      const double e = rel(J(i, j), dc[i]);
      if (!in_pattern(i, j) && std::abs(dc[i]) > 1e-8) ++report.pattern_misses;
      auto& b = blocks[block_of(problem.constraint_name(i))];
      b = std::max(b, e);
      if (e > worst_row_err) {
        worst_row_err = e;
        report.worst_constraint = i;
      }
    }
    report.jacobian_error = std::max(report.jacobian_error, worst_row_err);
    const Vector dg = (gp - gm) / (2 * step);
    for (int i = 0; i < n; ++i) report.hessian_error = std::max(report.hessian_error, rel(H(i, j), dg[i]));
  }
  report.block_errors.assign(blocks.begin(), blocks.end());
  return report;
}

}  // namespace hopper::nlp
