// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/transforms.hpp"

#include <cmath>
#include <string>

namespace otfs_rsma {

GridConfig::GridConfig(int delay_bins, int doppler_bins, double subcarrier_spacing_hz)
    : m_(delay_bins), n_(doppler_bins), delta_f_(subcarrier_spacing_hz) {
  if (m_ < 1 || n_ < 1) {
    throw DimensionError("grid needs M >= 1 and N >= 1, got M=" + std::to_string(m_) +
                         " N=" + std::to_string(n_));
  }
  if (!(delta_f_ > 0.0) || !std::isfinite(delta_f_)) {
    throw InvalidParameter("subcarrier spacing must be positive and finite");
  }
}

CMatrix dft_matrix(int n) {
  if (n < 1) throw DimensionError("dft_matrix: n must be >= 1");
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      // reduce rc mod n first so large products keep full phase accuracy
      const long long k = (static_cast<long long>(r) * c) % n;
      const double angle = -2.0 * kPi * static_cast<double>(k) / n;
      f(r, c) = std::polar(scale, angle);
    }
  }
  return f;
}

namespace {

void check_length(Eigen::Index len, const GridConfig& grid, const char* what) {
  if (len != grid.size()) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(grid.size()) +
                         ", got " + std::to_string(len));
  }
}

}  // namespace

CVector dd_to_td(const CVector& x_dd, const GridConfig& grid) {
  check_length(x_dd.size(), grid, "dd_to_td");
  // (F_N^H kron I_M) vec(X) = vec(X conj(F_N)) since F_N is symmetric.
  Eigen::Map<const CMatrix> x(x_dd.data(), grid.M(), grid.N());
  CMatrix y = x * dft_matrix(grid.N()).conjugate();
  return Eigen::Map<const CVector>(y.data(), grid.size());
}

CVector td_to_dd(const CVector& y_td, const GridConfig& grid) {
  check_length(y_td.size(), grid, "td_to_dd");
  Eigen::Map<const CMatrix> y(y_td.data(), grid.M(), grid.N());
  CMatrix x = y * dft_matrix(grid.N());
  return Eigen::Map<const CVector>(x.data(), grid.size());
}

CMatrix td_to_dd_rows(const CMatrix& rows_td, const GridConfig& grid) {
  check_length(rows_td.rows(), grid, "td_to_dd_rows");
  const CMatrix f = dft_matrix(grid.N());
  const int m = grid.M();
  const int n = grid.N();
  CMatrix out(rows_td.rows(), rows_td.cols());
  for (Eigen::Index c = 0; c < rows_td.cols(); ++c) {
    Eigen::Map<const CMatrix> y(rows_td.col(c).data(), m, n);
    Eigen::Map<CMatrix> x(out.col(c).data(), m, n);
    x.noalias() = y * f;
  }
  return out;
}

CMatrix dd_to_td_matrix(const GridConfig& grid) {
  const CMatrix fh = dft_matrix(grid.N()).adjoint();
  const int m = grid.M();
  CMatrix u = CMatrix::Zero(grid.size(), grid.size());
  for (int r = 0; r < grid.N(); ++r) {
    for (int c = 0; c < grid.N(); ++c) {
      u.block(r * m, c * m, m, m).diagonal().setConstant(fh(r, c));
    }
  }
  return u;
}

CMatrix isfft(const CVector& x_dd, const GridConfig& grid) {
  check_length(x_dd.size(), grid, "isfft");
  Eigen::Map<const CMatrix> x(x_dd.data(), grid.M(), grid.N());
  return dft_matrix(grid.M()) * x * dft_matrix(grid.N()).adjoint();
}

CVector sfft(const CMatrix& x_tf, const GridConfig& grid) {
  if (x_tf.rows() != grid.M() || x_tf.cols() != grid.N()) {
    throw DimensionError("sfft: time-frequency grid must be M x N");
  }
  CMatrix x = dft_matrix(grid.M()).adjoint() * x_tf * dft_matrix(grid.N());
  return Eigen::Map<const CVector>(x.data(), grid.size());
}

double sinc(double x) {
  if (x == std::nearbyint(x)) return x == 0.0 ? 1.0 : 0.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

}  // namespace otfs_rsma
