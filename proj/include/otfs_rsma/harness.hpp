// SPDX-License-Identifier: Apache-2.0
//
// Seeded Monte-Carlo experiments: configuration, per-draw channel and
// sample generation, strategy sweeps, CSV output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otfs_rsma/baselines.hpp"
#include "otfs_rsma/channel.hpp"

namespace otfs_rsma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentMode { Standard, Mismatch };

std::string to_string(ExperimentMode m);
ExperimentMode parse_mode(const std::string& name);

/// Flat key-value configuration with [sections]; see README for the schema.
struct ExperimentConfig {
  // [grid]
  int M = 4;
  int N = 4;
  double delta_f = 480e3;
  // [system]
  int n_t = 2;
  int users = 2;
  double noise_var = 1.0;
  // [channel]
  double rician_factor_db = 10.0;
  int num_nlos = 2;
  double nlos_variance = 1.0;
  double max_delay_slots = 1.0;
  double satellite_velocity = 7.58e3;
  double carrier_frequency = 7.6e9;
  // [csit]
  double rho = 0.7;
  double pilot_snr = 1000.0;  // linear
  std::optional<double> error_variance;
  int samples = 50;
  std::optional<int> eval_samples;
  // [experiment]
  std::vector<Strategy> strategies{Strategy::Rsma, Strategy::Sdma, Strategy::Noma};
  std::vector<double> pt_db{0.0, 10.0, 20.0, 30.0};
  int draws = 100;
  std::uint64_t master_seed = 1;
  ExperimentMode mode = ExperimentMode::Standard;
  std::string output = "results";
  bool dump_channels = false;
  bool dump_traces = false;
  // [optimizer]
  double epsilon = 1e-4;
  int max_iters = 500;
  ArrangementMode arrangement = ArrangementMode::Fixed;
  double common_power_fraction = 0.5;
  double qcqp_tol_gap = 1e-8;
  double qcqp_tol_feas = 1e-9;
  int qcqp_max_newton = 2000;
  bool rsma_baseline_starts = true;

  /// Throws ConfigError naming the offending key or line.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& file);
  /// Canonical text form; parse(to_text()) reproduces every field exactly.
  std::string to_text() const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;

  GridConfig grid() const { return GridConfig(M, N, delta_f); }
  ChannelProfile profile() const;
  CsitModel csit() const;
  int num_eval_samples() const { return eval_samples.value_or(samples); }
  StrategyOptions strategy_options() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Stream tags for seed derivation.
enum class SeedTag : std::uint64_t { Paths = 1, Train = 2, Eval = 3 };

/// Channel estimates and sample sets of one outer draw.
struct DrawData {
  std::vector<UserChannel> estimates;
  SampleSet train;
  SampleSet eval;
  PreparedSampleSet train_prepared;
  PreparedSampleSet eval_prepared;
  std::vector<PreparedChannel> nominal;
};

/// Builds the draw; with `idealized`, fractional delay/Doppler are removed
/// from the paths before anything else is assembled.
DrawData make_draw(const ExperimentConfig& cfg, int draw, bool idealized = false);

struct ResultRow {
  Strategy strategy = Strategy::Rsma;
  double pt_db = 0.0;
  int draw = 0;
  double esr_saf = 0.0;  // bits/symbol
  double esr_oos = 0.0;  // bits/symbol
  int iters = 0;
  bool converged = false;
};

struct MismatchRow {
  Strategy strategy = Strategy::Rsma;
  double pt_db = 0.0;
  int draw = 0;
  double ideal_on_ideal = 0.0;
  double ideal_on_real = 0.0;
  double robust_on_real = 0.0;
};

struct SummaryStat {
  double mean = 0.0;
  double std_error = 0.0;
};

SummaryStat summarize(const std::vector<double>& values);

/// Rows ordered by (strategy, P_t, draw) following the config lists.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);
std::vector<MismatchRow> mismatch_experiment(const ExperimentConfig& cfg);

void write_results_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       const std::vector<ResultRow>& rows);
void write_summary_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       const std::vector<ResultRow>& rows);
void write_mismatch_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                        const std::vector<MismatchRow>& rows);
void write_mismatch_summary_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                                const std::vector<MismatchRow>& rows);

/// Runs the configured mode and writes every output file into cfg.output.
void run_and_write(const ExperimentConfig& cfg);

/// Worker count: OTFS_RSMA_THREADS if set, else hardware concurrency.
int worker_count();

}  // namespace otfs_rsma
