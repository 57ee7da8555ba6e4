// SPDX-License-Identifier: Apache-2.0
//
// LEO satellite multipath channel in the delay-Doppler domain: path
// sampling, the time-domain channel operator with fractional delay and
// Doppler, statistical CSIT, and the conditional sample sets used by the
// sample-average optimizer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "otfs_rsma/transforms.hpp"
#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

/// One propagation path. Delay is (delay_int + delay_frac) bins of 1/(M df),
/// Doppler is (doppler_int + doppler_frac) bins of 1/(N T).
struct PathParams {
  cplx gain{1.0, 0.0};
  double aod = 0.0;  // radians, [-pi/2, pi/2)
  int delay_int = 0;
  double delay_frac = 0.0;
  int doppler_int = 0;
  double doppler_frac = 0.0;
  bool is_los = false;

  double delay_bins() const { return delay_int + delay_frac; }
  double doppler_bins() const { return doppler_int + doppler_frac; }

  bool operator==(const PathParams&) const = default;
};

/// Parameters of the path generator. Defaults follow the LEO scenario
/// (7.58 km/s, 7.6 GHz carrier, 2 NLoS paths, 10 dB Rician factor).
struct ChannelProfile {
  double rician_factor = 10.0;        // linear
  int num_nlos = 2;
  double nlos_variance = 1.0;
  double max_delay_slots = 1.0;       // tau_max = max_delay_slots * T, must be in (0, 1]
  double satellite_velocity = 7.58e3; // m/s
  double carrier_frequency = 7.6e9;   // Hz
};

/// Splits a physical delay (s) and Doppler (Hz) into integer and fractional
/// bin indices by nearest-integer rounding; fractional parts land in [-1/2, 1/2).
PathParams quantize_path(cplx gain, double aod, double delay_s, double doppler_hz,
                         const GridConfig& grid, bool is_los);

/// Throws InvalidParameter unless the path respects the delay/Doppler bounds
/// (total delay in [0, T], |Doppler| <= delta_f, fractional parts in [-1/2, 1/2)).
void validate_path(const PathParams& path, const GridConfig& grid);

/// Draws a LoS path (index 0) followed by num_nlos NLoS paths.
///
/// The random stream consumes physical quantities only, in a fixed order,
/// so the same seed produces the same geometry on every grid size.
std::vector<PathParams> sample_paths(const GridConfig& grid, const ChannelProfile& profile,
                                     std::uint64_t seed);

/// Copy of the paths with fractional delay/Doppler removed (integer-grid model).
std::vector<PathParams> idealize_paths(std::vector<PathParams> paths);

/// ULA steering vector with half-wavelength spacing: entry m = exp(-j pi sin(theta) m).
CVector steering_vector(double aod, int n_t);

/// Diagonal of the Doppler matrix; entry n' + N m' is
/// exp(j 2 pi (k + kappa) / N * (n' + m' / M)).
CVector doppler_matrix(const PathParams& path, const GridConfig& grid);

/// Delay matrix; entry (n' + N m', n + N m) is sinc(M (n' - n) + m' - m - l - ell).
RMatrix delay_matrix(const PathParams& path, const GridConfig& grid);

/// Per-path phase exp(-j 2 pi (k + kappa)(l + ell) / MN).
cplx path_phase(const PathParams& path, const GridConfig& grid);

/// Sum over paths of gain * phase * (a(theta)^T kron Delta Xi); MN x (n_t MN).
/// Column block b multiplies antenna b's time-domain signal.
CMatrix td_channel(const std::vector<PathParams>& paths, const GridConfig& grid, int n_t);

/// (F_N kron I_M) H_td.
CMatrix effective_dd_channel(const CMatrix& h_td, const GridConfig& grid);

struct UserChannel {
  std::vector<PathParams> paths;  // paths[0] is LoS
  double rician_factor = 10.0;
  int num_nlos = 0;
  CMatrix h_td;                   // MN x (n_t MN)
  double noise_var = 1.0;
};

UserChannel make_user_channel(std::vector<PathParams> paths, const GridConfig& grid, int n_t,
                              double rician_factor, double noise_var = 1.0);

/// Path-gain error variance rho^2 gamma_e + (1 - rho^2) / Q, evaluated literally.
double csit_error_variance(double rho, double pilot_snr, int num_nlos);

struct CsitModel {
  double rho = 1.0;
  double pilot_snr = 1000.0;
  double error_var = 0.0;
  int num_samples = 1;

  /// Error variance from the correlation / pilot-SNR formula.
  static CsitModel from_formula(double rho, double pilot_snr, int num_nlos, int num_samples);
  /// Error variance given directly (bypasses the formula).
  static CsitModel with_error_variance(double error_var, int num_samples);
};

/// L conditional channel draws for one user, all in the effective DD domain.
struct UserSamples {
  CMatrix nominal;                    // effective DD channel of the estimate
  std::vector<CMatrix> realizations;  // estimate + error, one per sample
  double noise_var = 1.0;
};

struct SampleSet {
  GridConfig grid;
  int n_t;
  std::vector<UserSamples> users;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_samples() const { return users.empty() ? 0 : static_cast<int>(users.front().realizations.size()); }
};

/// Draws L realizations H = H_est + E with per-path gain errors
/// e_q ~ CN(0, error_var) sharing the estimate's delay/Doppler/AoD structure.
/// Sample l uses its own RNG stream derived from (seed, l). With
/// force_nominal_first, sample 0 is the estimate itself.
UserSamples sample_csit_realizations(const UserChannel& estimate, const GridConfig& grid, int n_t,
                                     const CsitModel& csit, std::uint64_t seed,
                                     bool force_nominal_first = false);

/// Per-user sample sets with user seeds derived from (seed, user).
SampleSet build_sample_set(const std::vector<UserChannel>& estimates, const GridConfig& grid,
                           int n_t, const CsitModel& csit, std::uint64_t seed,
                           bool force_nominal_first = false);

/// Binary matrix dump: "OTFSMAT1", u32 rows, u32 cols, then row-major
/// (float32 re, float32 im) pairs, all little-endian.
void write_matrix_file(const std::filesystem::path& file, const CMatrix& m);
CMatrix read_matrix_file(const std::filesystem::path& file);

}  // namespace otfs_rsma
