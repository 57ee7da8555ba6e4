// SPDX-License-Identifier: Apache-2.0
//
// Small dense convex QCQP solver: log-barrier path following with damped
// Newton centering and a phase-I search for a strictly feasible start.
//
//   minimize    f_0(x)
//   subject to  f_i(x) <= 0,  i = 1..m
//
// with every f_i(x) = 1/2 x^T H_i x + g_i^T x + c_i and H_i PSD.

#pragma once

#include <optional>
#include <vector>

#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

struct QuadraticFunction {
  RMatrix hessian;  // empty means linear
  RVector gradient;
  double constant = 0.0;

  static QuadraticFunction linear(RVector g, double c);

  bool is_linear() const { return hessian.size() == 0; }
  double value(const RVector& x) const;
  RVector grad(const RVector& x) const;
};

struct QcqpProblem {
  int dim = 0;
  QuadraticFunction objective;
  std::vector<QuadraticFunction> constraints;
};

struct QcqpOptions {
  double tol_gap = 1e-8;         // stop when m / tau falls below this
  double tol_feas = 1e-9;        // max constraint violation accepted on return
  double tau_init = 1.0;
  double tau_growth = 20.0;
  int max_newton = 2000;         // total Newton steps across all centering passes
  double psd_tolerance = 1e-9;   // relative, for the convexity check
};

enum class QcqpStatus { Optimal, Degraded };

struct QcqpResult {
  RVector x;
  RVector duals;                // one per constraint
  double objective = 0.0;
  double gap = 0.0;             // m / tau at the returned point
  double kkt_stationarity = 0.0;  // || grad f_0 + sum lambda_i grad f_i ||
  double kkt_complementarity = 0.0;  // max |lambda_i f_i|
  double max_violation = 0.0;
  int newton_iterations = 0;
  QcqpStatus status = QcqpStatus::Optimal;
};

/// Throws InvalidParameter for non-convex data and SolverError when no
/// strictly feasible point exists. A start point is used for phase I when
/// it is not strictly feasible, and directly otherwise.
QcqpResult qcqp_solve(const QcqpProblem& problem, const QcqpOptions& options = {},
                      const std::optional<RVector>& start = std::nullopt);

}  // namespace otfs_rsma
