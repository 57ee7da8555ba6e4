// SPDX-License-Identifier: Apache-2.0
//
// MMSE equalizers and weights, the augmented weighted MSE, and the
// quadratic forms in the precoders that the QCQP step consumes.
//
// The AWMSE is expressed in bits:
//   xi = MN + (tr(B E) - MN - ln det B) / ln 2.
// It has the same minimizers as tr(B E) - ln det B (A = MMSE, B = E^-1)
// and its minimum is MN - R with R the log2-det rate in bits per frame.

#pragma once

#include <vector>

#include "otfs_rsma/signal.hpp"
#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

/// A = W^H T^-1 via a Cholesky solve, where W = H~ P~_j.
CMatrix mmse_equalizer(const CMatrix& w, const CMatrix& t);

/// E = A T A^H - A W - W^H A^H + I for any equalizer A.
CMatrix mse_matrix(const CMatrix& a, const CMatrix& w, const CMatrix& t);

/// B = E^-1, Hermitian-symmetrized.
CMatrix mmse_weight(const CMatrix& e);

/// AWMSE in bits (see header comment).
double awmse(const CMatrix& b, const CMatrix& e);

/// tr(B E) - log2 det B, the weighted MSE with a base-2 weight penalty.
/// Equals awmse() whenever tr(B E) = MN, in particular at B = E^-1.
double awmse_log2(const CMatrix& b, const CMatrix& e);

/// Equalizer, MSE matrix and weight of one (stream, decoder) pair.
struct MmsePair {
  CMatrix a;
  CMatrix e;
  CMatrix b;
  double logdet_b = 0.0;  // natural log
};

MmsePair mmse_pair(const CMatrix& w, const CMatrix& t);

/// tr(B E) as a function of the precoders for fixed (A, B), reduced to the
/// antenna domain. With Z_a = A hu[a]:
///   quad(k, a + n_t b) = (Z_a^H B Z_b)_kk,   lin(k, a) = (Z_a^H B)_kk,
/// so for a stream with arrangement psi,
///   Q(psi)_ab = sum_k psi_k quad(k, a + n_t b),  v(psi)_a = sum_k psi_k lin(k, a),
/// and tr(B E) = sum_{j in residual set} p_j^H Q(psi_j) p_j - 2 Re(v(psi_j)^H p_j) + trace_const.
struct QuadraticForm {
  int mn = 0;
  int n_t = 0;
  CMatrix quad;              // MN x n_t^2
  CMatrix lin;               // MN x n_t
  double trace_const = 0.0;  // noise_var tr(B A A^H) + tr(B)
  double logdet_b = 0.0;     // ln det B

  CMatrix reduced_quadratic(const RVector& psi) const;
  CVector reduced_linear(const RVector& psi) const;
  /// sigma^2 tr(B A A^H) + tr(B) - log2 det B.
  double scalar_log2() const;
  bool is_zero(double tol = 0.0) const;
};

QuadraticForm quadratic_form(const PreparedChannel& ch, const CMatrix& a, const CMatrix& b,
                             double logdet_b);

/// Entrywise mean. Throws on empty input or shape mismatch.
QuadraticForm saf_average(const std::vector<QuadraticForm>& forms);

/// tr(B E) evaluated through the form for the given precoders, layout and
/// residual set of (user, stream).
double form_trace(const QuadraticForm& f, const CMatrix& precoders, const StreamLayout& layout,
                  int user, int stream);

/// AWMSE (bits) evaluated through the form.
double form_awmse(const QuadraticForm& f, const CMatrix& precoders, const StreamLayout& layout,
                  int user, int stream);

/// Dense forms over vec(P~): C = I_MN kron G with G = H~^H A^H B A H~,
/// d = vec(H~^H A^H B), scalar = sigma^2 tr(B A A^H) + tr(B) - log2 det B.
/// Only the core G is stored.
struct DenseQuadraticForm {
  CMatrix g;
  CVector d;
  double scalar = 0.0;

  /// (I kron G) vec(P~) = vec(G P~).
  CVector apply_c(const CVector& p_vec) const;
  /// p^H C p via the Kronecker identity.
  double quadratic(const CVector& p_vec) const;
};

DenseQuadraticForm dense_quadratic_form(const CMatrix& h_dd, const CMatrix& a, const CMatrix& b,
                                        double noise_var);

/// SAF forms for every (stream, decoder) pair at a precoder point.
/// forms[j][k] belongs to decoder layout.streams[j].decoders[k].
/// rates[j][k] is the matching sample-average rate (bits/frame) at the point.
struct SafForms {
  std::vector<std::vector<QuadraticForm>> forms;
  std::vector<std::vector<double>> rates;
};

SafForms compute_saf_forms(const PreparedSampleSet& samples, const CMatrix& precoders,
                           const StreamLayout& layout);

}  // namespace otfs_rsma
