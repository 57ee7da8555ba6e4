// SPDX-License-Identifier: Apache-2.0
//
// Delay-Doppler / time-frequency / time-domain maps for an OTFS frame with
// rectangular transmit and receive pulses.
//
// Vectorization convention (used by every module): an M x N delay-Doppler
// grid X is flattened column-major, delay index fastest, so grid cell
// (m, n) lives at position m + M*n of vec(X).

#pragma once

#include <cstddef>

#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

/// OTFS frame geometry: M delay bins, N Doppler bins, subcarrier spacing.
class GridConfig {
 public:
  GridConfig(int delay_bins, int doppler_bins, double subcarrier_spacing_hz);

  int M() const { return m_; }
  int N() const { return n_; }
  int size() const { return m_ * n_; }
  double subcarrier_spacing() const { return delta_f_; }
  /// Slot duration T = 1 / delta_f.
  double slot_duration() const { return 1.0 / delta_f_; }
  /// Frame duration T_f = N T.
  double frame_duration() const { return n_ * slot_duration(); }
  /// Bandwidth B = M delta_f.
  double bandwidth() const { return m_ * delta_f_; }

  /// Position of grid cell (delay m, Doppler n) in vec(X).
  int index(int m, int n) const { return m + m_ * n; }

  bool operator==(const GridConfig&) const = default;

 private:
  int m_;
  int n_;
  double delta_f_;
};

/// Normalized n x n DFT matrix, entry (r, c) = exp(-j 2 pi r c / n) / sqrt(n).
CMatrix dft_matrix(int n);

/// x_td = (F_N^H kron I_M) x_dd, computed on the M x N reshape.
CVector dd_to_td(const CVector& x_dd, const GridConfig& grid);

/// y_dd = (F_N kron I_M) y_td, the adjoint of dd_to_td.
CVector td_to_dd(const CVector& y_td, const GridConfig& grid);

/// Applies td_to_dd to every column of an MN-row matrix.
CMatrix td_to_dd_rows(const CMatrix& rows_td, const GridConfig& grid);

/// Explicit MN x MN matrix F_N^H kron I_M. Small grids and tests only.
CMatrix dd_to_td_matrix(const GridConfig& grid);

/// ISFFT of a vectorized DD grid; returns the M x N time-frequency grid
/// F_M X F_N^H. Diagnostics only: the signal chain uses dd_to_td directly.
CMatrix isfft(const CVector& x_dd, const GridConfig& grid);

/// SFFT, the inverse of isfft: returns vec(F_M^H X_tf F_N).
CVector sfft(const CMatrix& x_tf, const GridConfig& grid);

/// Normalized sinc, sin(pi x) / (pi x). Exact 1 at 0 and exact 0 at
/// every other integer.
double sinc(double x);

}  // namespace otfs_rsma
