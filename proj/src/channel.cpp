// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/channel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "otfs_rsma/rng.hpp"

namespace otfs_rsma {

namespace {

constexpr double kBoundSlack = 1e-9;

// nearest-integer split with the fractional part in [-1/2, 1/2)
void split_bins(double x, int& integer, double& fraction) {
  const double l = std::floor(x + 0.5);
  integer = static_cast<int>(l);
  fraction = x - l;
}

}  // namespace

PathParams quantize_path(cplx gain, double aod, double delay_s, double doppler_hz,
                         const GridConfig& grid, bool is_los) {
  PathParams p;
  p.gain = gain;
  p.aod = aod;
  p.is_los = is_los;
  split_bins(delay_s * grid.M() * grid.subcarrier_spacing(), p.delay_int, p.delay_frac);
  split_bins(doppler_hz * grid.N() * grid.slot_duration(), p.doppler_int, p.doppler_frac);
  return p;
}

void validate_path(const PathParams& path, const GridConfig& grid) {
  if (!(path.delay_frac >= -0.5 && path.delay_frac < 0.5) ||
      !(path.doppler_frac >= -0.5 && path.doppler_frac < 0.5)) {
    throw InvalidParameter("fractional delay/Doppler must lie in [-1/2, 1/2)");
  }
  const double delay = path.delay_bins();
  if (delay < -kBoundSlack || delay > grid.M() + kBoundSlack) {
    throw InvalidParameter("path delay exceeds the slot duration T");
  }
  if (std::abs(path.doppler_bins()) > grid.N() + kBoundSlack) {
    throw InvalidParameter("path Doppler exceeds the subcarrier spacing");
  }
  if (!std::isfinite(path.gain.real()) || !std::isfinite(path.gain.imag())) {
    throw InvalidParameter("path gain must be finite");
  }
}

std::vector<PathParams> sample_paths(const GridConfig& grid, const ChannelProfile& profile,
                                     std::uint64_t seed) {
  if (profile.num_nlos < 0) throw InvalidParameter("number of NLoS paths must be >= 0");
  if (!(profile.rician_factor > 0.0)) throw InvalidParameter("Rician factor must be > 0");
  if (!(profile.max_delay_slots > 0.0 && profile.max_delay_slots <= 1.0)) {
    throw InvalidParameter("max_delay_slots must lie in (0, 1]");
  }
  if (!(profile.nlos_variance >= 0.0)) throw InvalidParameter("NLoS variance must be >= 0");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double gamma = profile.rician_factor;
  const double tau_max = profile.max_delay_slots * grid.slot_duration();
  const double nu_max = profile.satellite_velocity / kSpeedOfLight * profile.carrier_frequency;
  const double nu_bound = grid.subcarrier_spacing();

  auto draw_aod = [&] { return -kPi / 2.0 + kPi * unit(rng); };
  auto draw_doppler = [&] {
    const double chi = kPi * unit(rng);
    return std::clamp(nu_max * std::cos(chi), -nu_bound, nu_bound);
  };

  std::vector<PathParams> paths;
  paths.reserve(static_cast<std::size_t>(profile.num_nlos) + 1);

  const double phi = 2.0 * kPi * unit(rng);
  const double los_aod = draw_aod();
  const double los_delay = tau_max * unit(rng);
  const double los_doppler = draw_doppler();
  paths.push_back(quantize_path(std::polar(std::sqrt(gamma / (gamma + 1.0)), phi), los_aod,
                                los_delay, los_doppler, grid, true));

  for (int q = 0; q < profile.num_nlos; ++q) {
    const cplx g = complex_normal(rng, profile.nlos_variance / (gamma + 1.0));
    const double aod = draw_aod();
    const double delay = los_delay + (tau_max - los_delay) * unit(rng);
    const double doppler = draw_doppler();
    paths.push_back(quantize_path(g, aod, delay, doppler, grid, false));
  }
  return paths;
}

std::vector<PathParams> idealize_paths(std::vector<PathParams> paths) {
  for (auto& p : paths) {
    p.delay_frac = 0.0;
    p.doppler_frac = 0.0;
  }
  return paths;
}

CVector steering_vector(double aod, int n_t) {
  if (n_t < 1) throw DimensionError("steering_vector: n_t must be >= 1");
  CVector a(n_t);
  const double s = std::sin(aod);
  for (int m = 0; m < n_t; ++m) a(m) = std::polar(1.0, -kPi * s * m);
  return a;
}

CVector doppler_matrix(const PathParams& path, const GridConfig& grid) {
  const int m_bins = grid.M();
  const int n_bins = grid.N();
  const double nu = path.doppler_bins();
  CVector diag(grid.size());
  for (int mp = 0; mp < m_bins; ++mp) {
    for (int np = 0; np < n_bins; ++np) {
      const double t = np + static_cast<double>(mp) / m_bins;
      diag(np + n_bins * mp) = std::polar(1.0, 2.0 * kPi * nu / n_bins * t);
    }
  }
  return diag;
}

RMatrix delay_matrix(const PathParams& path, const GridConfig& grid) {
  const int m_bins = grid.M();
  const int n_bins = grid.N();
  const double tau = path.delay_bins();
  RMatrix xi(grid.size(), grid.size());
  for (int mp = 0; mp < m_bins; ++mp) {
    for (int np = 0; np < n_bins; ++np) {
      const int row = np + n_bins * mp;
      for (int m = 0; m < m_bins; ++m) {
        for (int n = 0; n < n_bins; ++n) {
          // integer offset first so the integer-delay case stays exact
          const int shift = m_bins * (np - n) + mp - m - path.delay_int;
          xi(row, n + n_bins * m) = sinc(static_cast<double>(shift) - path.delay_frac);
        }
      }
    }
  }
  return xi;
}

cplx path_phase(const PathParams& path, const GridConfig& grid) {
  return std::polar(1.0, -2.0 * kPi * path.doppler_bins() * path.delay_bins() / grid.size());
}

namespace {

// gain-free (a^T kron Delta Xi) scaled by the path phase
CMatrix path_basis(const PathParams& path, const GridConfig& grid, int n_t) {
  const int mn = grid.size();
  const CMatrix dx = doppler_matrix(path, grid).asDiagonal() * delay_matrix(path, grid).cast<cplx>();
  const CVector a = steering_vector(path.aod, n_t);
  const cplx phase = path_phase(path, grid);
  CMatrix basis(mn, static_cast<Eigen::Index>(n_t) * mn);
  for (int b = 0; b < n_t; ++b) basis.middleCols(b * mn, mn) = (phase * a(b)) * dx;
  return basis;
}

}  // namespace

CMatrix td_channel(const std::vector<PathParams>& paths, const GridConfig& grid, int n_t) {
  if (paths.empty()) throw InvalidParameter("td_channel: path list is empty");
  if (n_t < 1) throw DimensionError("td_channel: n_t must be >= 1");
  const int mn = grid.size();
  CMatrix h = CMatrix::Zero(mn, static_cast<Eigen::Index>(n_t) * mn);
  for (const auto& p : paths) h += p.gain * path_basis(p, grid, n_t);
  if (h.rows() != mn || h.cols() != static_cast<Eigen::Index>(n_t) * mn) {
    throw DimensionError("td_channel: assembled operator has the wrong shape");
  }
  return h;
}

CMatrix effective_dd_channel(const CMatrix& h_td, const GridConfig& grid) {
  if (h_td.rows() != grid.size() || h_td.cols() % grid.size() != 0) {
    throw DimensionError("effective_dd_channel: expected MN x (n_t MN) operator");
  }
  return td_to_dd_rows(h_td, grid);
}

UserChannel make_user_channel(std::vector<PathParams> paths, const GridConfig& grid, int n_t,
                              double rician_factor, double noise_var) {
  if (!(noise_var > 0.0)) throw InvalidParameter("noise variance must be > 0");
  UserChannel ch;
  ch.h_td = td_channel(paths, grid, n_t);
  ch.num_nlos = static_cast<int>(paths.size()) - 1;
  ch.paths = std::move(paths);
  ch.rician_factor = rician_factor;
  ch.noise_var = noise_var;
  return ch;
}

double csit_error_variance(double rho, double pilot_snr, int num_nlos) {
  if (num_nlos < 1) throw InvalidParameter("csit_error_variance: Q must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidParameter("csit_error_variance: rho must be in [0, 1]");
  if (!(pilot_snr > 0.0)) throw InvalidParameter("csit_error_variance: pilot SNR must be > 0");
  return rho * rho * pilot_snr + (1.0 - rho * rho) / num_nlos;
}

CsitModel CsitModel::from_formula(double rho, double pilot_snr, int num_nlos, int num_samples) {
  if (num_samples < 1) throw InvalidParameter("CSIT sample count must be >= 1");
  CsitModel m;
  m.rho = rho;
  m.pilot_snr = pilot_snr;
  m.error_var = csit_error_variance(rho, pilot_snr, num_nlos);
  m.num_samples = num_samples;
  return m;
}

CsitModel CsitModel::with_error_variance(double error_var, int num_samples) {
  if (num_samples < 1) throw InvalidParameter("CSIT sample count must be >= 1");
  if (!(error_var >= 0.0)) throw InvalidParameter("CSIT error variance must be >= 0");
  CsitModel m;
  m.error_var = error_var;
  m.num_samples = num_samples;
  return m;
}

UserSamples sample_csit_realizations(const UserChannel& estimate, const GridConfig& grid, int n_t,
                                     const CsitModel& csit, std::uint64_t seed,
                                     bool force_nominal_first) {
  if (csit.num_samples < 1) throw InvalidParameter("CSIT sample count must be >= 1");
  if (!(csit.error_var >= 0.0)) throw InvalidParameter("CSIT error variance must be >= 0");
  if (estimate.h_td.rows() != grid.size() ||
      estimate.h_td.cols() != static_cast<Eigen::Index>(n_t) * grid.size()) {
    throw DimensionError("sample_csit_realizations: estimate is not assembled for this grid");
  }

  UserSamples out;
  out.noise_var = estimate.noise_var;
  out.nominal = effective_dd_channel(estimate.h_td, grid);
  out.realizations.reserve(static_cast<std::size_t>(csit.num_samples));

  std::vector<CMatrix> bases;
  if (csit.error_var > 0.0) {
    bases.reserve(estimate.paths.size());
    for (const auto& p : estimate.paths) bases.push_back(effective_dd_channel(path_basis(p, grid, n_t), grid));
  }

  for (int l = 0; l < csit.num_samples; ++l) {
    if (bases.empty() || (force_nominal_first && l == 0)) {
      out.realizations.push_back(out.nominal);
      continue;
    }
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(l)}));
    CMatrix h = out.nominal;
    for (const auto& b : bases) h += complex_normal(rng, csit.error_var) * b;
    out.realizations.push_back(std::move(h));
  }
  return out;
}

SampleSet build_sample_set(const std::vector<UserChannel>& estimates, const GridConfig& grid,
                           int n_t, const CsitModel& csit, std::uint64_t seed,
                           bool force_nominal_first) {
  SampleSet set{grid, n_t, {}};
  set.users.reserve(estimates.size());
  for (std::size_t u = 0; u < estimates.size(); ++u) {
    set.users.push_back(sample_csit_realizations(estimates[u], grid, n_t, csit,
                                                 derive_seed(seed, {static_cast<std::uint64_t>(u)}),
                                                 force_nominal_first));
  }
  return set;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "matrix dump assumes a little-endian host");

constexpr std::array<char, 8> kMatrixMagic{'O', 'T', 'F', 'S', 'M', 'A', 'T', '1'};

}  // namespace

void write_matrix_file(const std::filesystem::path& file, const CMatrix& m) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  os.write(kMatrixMagic.data(), kMatrixMagic.size());
  os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const std::array<float, 2> pair{static_cast<float>(m(r, c).real()),
                                      static_cast<float>(m(r, c).imag())};
      os.write(reinterpret_cast<const char*>(pair.data()), sizeof pair);
    }
  }
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

CMatrix read_matrix_file(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  std::array<char, 8> magic{};
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  is.read(magic.data(), magic.size());
  is.read(reinterpret_cast<char*>(&rows), sizeof rows);
  is.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!is || magic != kMatrixMagic) throw std::runtime_error(file.string() + " is not an OTFSMAT1 file");
  CMatrix m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      std::array<float, 2> pair{};
      is.read(reinterpret_cast<char*>(pair.data()), sizeof pair);
      m(r, c) = cplx(pair[0], pair[1]);
    }
  }
  if (!is) throw std::runtime_error(file.string() + " is truncated");
  return m;
}

}  // namespace otfs_rsma
