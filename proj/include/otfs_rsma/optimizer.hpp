// SPDX-License-Identifier: Apache-2.0
//
// Alternating optimization of equalizers/weights, precoders with the
// common-rate split, and DD arrangements.

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "otfs_rsma/qcqp.hpp"
#include "otfs_rsma/signal.hpp"
#include "otfs_rsma/wmmse.hpp"

namespace otfs_rsma {

enum class ArrangementMode { Fixed, GreedyFlip, Exhaustive };

ArrangementMode parse_arrangement_mode(const std::string& name);
std::string to_string(ArrangementMode m);

struct AoConfig {
  double epsilon = 1e-4;
  int max_iters = 500;
  QcqpOptions qcqp;
  ArrangementMode arrangement = ArrangementMode::Fixed;
  double common_power_fraction = 0.5;
  std::optional<CMatrix> initial_precoders;
};

/// Value of the precoder program's objective t at a point, with every
/// shared-stream slack at its smallest feasible value
/// s_j = max_u phi_{j,u} - MN. Returns +inf when some s_j would be positive.
/// With forms computed at `precoders` this equals
/// (#singleton streams) MN - SAF sum rate.
double p4_objective(const SafForms& forms, const StreamLayout& layout, const CMatrix& precoders);

/// Smallest feasible slack per stream (0 for singleton streams).
RVector p4_slacks(const SafForms& forms, const StreamLayout& layout, const CMatrix& precoders);

struct PrecoderUpdate {
  CMatrix precoders;
  RMatrix mu;              // streams x users, nonzero only for beneficiaries of shared streams
  double t = 0.0;
  bool solver_point = true;   // false when the previous iterate was kept
  QcqpStatus status = QcqpStatus::Optimal;
  double kkt_stationarity = 0.0;
  double kkt_complementarity = 0.0;
  double max_violation = 0.0;
};

/// Solves the convex precoder program for fixed SAF forms and arrangements.
/// The returned point is never worse than `previous` under the same forms.
PrecoderUpdate precoder_update(const SafForms& forms, const StreamLayout& layout, double p_t,
                               const CMatrix& previous, const QcqpOptions& options = {});

/// Discrete arrangement step for fixed precoders and forms. Returns the new
/// layout; `t` receives the objective at it.
StreamLayout arrangement_update(const SafForms& forms, const StreamLayout& layout,
                                const CMatrix& precoders, ArrangementMode mode, double& t);

/// Dominant-eigenvector initialization on the nominal channels.
CMatrix initial_precoders(const std::vector<PreparedChannel>& nominal, const StreamLayout& layout,
                          double p_t, double common_fraction = 0.5);

struct TraceEntry {
  int iteration = 0;
  double t = 0.0;
  double power = 0.0;
  RVector stream_norms;
};

struct PrecoderSolution {
  CMatrix precoders;       // streams x n_t
  RMatrix mu;              // streams x users
  StreamLayout layout;     // with the final arrangements
  std::vector<TraceEntry> trace;  // trace[0] is the initial point
  bool converged = false;
  int iterations = 0;
  int degraded_steps = 0;
  RMatrix saf_rates;       // streams x users, bits/frame, at the final point
  double saf_sum_rate = 0.0;  // bits/frame

  std::vector<double> objective_trace() const;
  /// -mu of the first common stream, length I (zero without one).
  RVector common_split() const;
};

PrecoderSolution alternating_optimize(const PreparedSampleSet& samples,
                                      const std::vector<PreparedChannel>& nominal,
                                      const StreamLayout& layout, double p_t, const AoConfig& cfg);

void write_trace_csv(const std::filesystem::path& file, const PrecoderSolution& sol);

}  // namespace otfs_rsma
