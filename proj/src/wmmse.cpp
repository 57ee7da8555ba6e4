// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/wmmse.hpp"

#include <cmath>

namespace otfs_rsma {

namespace {

const double kLn2 = std::log(2.0);

double logdet_llt(const Eigen::LLT<CMatrix>& llt) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < llt.matrixLLT().rows(); ++k) acc += std::log(llt.matrixLLT()(k, k).real());
  return 2.0 * acc;
}

CMatrix hermitian_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

CMatrix mmse_equalizer(const CMatrix& w, const CMatrix& t) {
  if (!w.allFinite() || !t.allFinite()) throw InvalidParameter("mmse_equalizer: non-finite input");
  Eigen::LLT<CMatrix> llt(t);
  if (llt.info() != Eigen::Success) throw SolverError("mmse_equalizer: covariance is not positive definite");
  return llt.solve(w).adjoint();
}

CMatrix mse_matrix(const CMatrix& a, const CMatrix& w, const CMatrix& t) {
  const CMatrix aw = a * w;
  CMatrix e = a * t * a.adjoint() - aw - aw.adjoint();
  e.diagonal().array() += 1.0;
  return hermitian_part(e);
}

CMatrix mmse_weight(const CMatrix& e) {
  Eigen::LLT<CMatrix> llt(e);
  if (llt.info() != Eigen::Success) throw SolverError("mmse_weight: MSE matrix is singular");
  return hermitian_part(llt.solve(CMatrix::Identity(e.rows(), e.cols())));
}

double awmse(const CMatrix& b, const CMatrix& e) {
  Eigen::LLT<CMatrix> llt(b);
  if (llt.info() != Eigen::Success) throw ContractViolation("awmse: weight must be positive definite");
  const double mn = static_cast<double>(b.rows());
  const double tr = (b * e).trace().real();
  return mn + (tr - mn - logdet_llt(llt)) / kLn2;
}

double awmse_log2(const CMatrix& b, const CMatrix& e) {
  Eigen::LLT<CMatrix> llt(b);
  if (llt.info() != Eigen::Success) throw ContractViolation("awmse_log2: weight must be positive definite");
  return (b * e).trace().real() - logdet_llt(llt) / kLn2;
}

MmsePair mmse_pair(const CMatrix& w, const CMatrix& t) {
  MmsePair out;
  Eigen::LLT<CMatrix> llt_t(t);
  if (llt_t.info() != Eigen::Success) throw SolverError("mmse_pair: covariance is not positive definite");
  out.a = llt_t.solve(w).adjoint();
  out.e = -(out.a * w);
  out.e.diagonal().array() += 1.0;
  out.e = hermitian_part(out.e);
  Eigen::LLT<CMatrix> llt_e(out.e);
  if (llt_e.info() != Eigen::Success) throw SolverError("mmse_pair: MSE matrix is singular");
  out.b = hermitian_part(llt_e.solve(CMatrix::Identity(w.cols(), w.cols())));
  out.logdet_b = -logdet_llt(llt_e);
  return out;
}

CMatrix QuadraticForm::reduced_quadratic(const RVector& psi) const {
  const CVector flat = quad.transpose() * psi.cast<cplx>();
  CMatrix q = Eigen::Map<const CMatrix>(flat.data(), n_t, n_t);
  return hermitian_part(q);
}

CVector QuadraticForm::reduced_linear(const RVector& psi) const {
  return lin.transpose() * psi.cast<cplx>();
}

double QuadraticForm::scalar_log2() const { return trace_const - logdet_b / kLn2; }

bool QuadraticForm::is_zero(double tol) const {
  return quad.cwiseAbs().maxCoeff() <= tol && lin.cwiseAbs().maxCoeff() <= tol;
}

QuadraticForm quadratic_form(const PreparedChannel& ch, const CMatrix& a, const CMatrix& b,
                             double logdet_b) {
  const int mn = ch.mn();
  const int n_t = ch.n_t();
  if (a.rows() != mn || a.cols() != mn || b.rows() != mn || b.cols() != mn) {
    throw DimensionError("quadratic_form: A and B must be MN x MN");
  }
  if ((b - b.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    throw ContractViolation("quadratic_form: weight matrix is not Hermitian");
  }
  QuadraticForm f;
  f.mn = mn;
  f.n_t = n_t;
  f.quad.resize(mn, n_t * n_t);
  f.lin.resize(mn, n_t);
  std::vector<CMatrix> z(static_cast<std::size_t>(n_t));
  std::vector<CMatrix> bz(static_cast<std::size_t>(n_t));
  for (int k = 0; k < n_t; ++k) {
    z[k].noalias() = a * ch.hu[static_cast<std::size_t>(k)];
    bz[k].noalias() = b * z[k];
  }
  for (int i = 0; i < n_t; ++i) {
    f.lin.col(i) = z[i].conjugate().cwiseProduct(b).colwise().sum().transpose();
    for (int k = 0; k < n_t; ++k) {
      f.quad.col(i + n_t * k) = z[i].conjugate().cwiseProduct(bz[k]).colwise().sum().transpose();
    }
  }
  const CMatrix ba = b * a;
  f.trace_const = ch.noise_var * a.conjugate().cwiseProduct(ba).sum().real() + b.trace().real();
  f.logdet_b = logdet_b;
  return f;
}

QuadraticForm saf_average(const std::vector<QuadraticForm>& forms) {
  if (forms.empty()) throw InvalidParameter("saf_average: no forms");
  QuadraticForm out = forms.front();
  for (std::size_t l = 1; l < forms.size(); ++l) {
    const auto& f = forms[l];
    if (f.mn != out.mn || f.n_t != out.n_t) throw DimensionError("saf_average: shape mismatch");
    out.quad += f.quad;
    out.lin += f.lin;
    out.trace_const += f.trace_const;
    out.logdet_b += f.logdet_b;
  }
  const double inv = 1.0 / static_cast<double>(forms.size());
  out.quad *= inv;
  out.lin *= inv;
  out.trace_const *= inv;
  out.logdet_b *= inv;
  return out;
}

double form_trace(const QuadraticForm& f, const CMatrix& precoders, const StreamLayout& layout,
                  int user, int stream) {
  double acc = f.trace_const;
  for (int j : layout.residual_streams(user, stream)) {
    const CVector p = precoders.row(j).transpose();
    const auto& psi = layout.streams[static_cast<std::size_t>(j)].arrangement;
    acc += p.dot(f.reduced_quadratic(psi) * p).real();
    if (j == stream) acc -= 2.0 * f.reduced_linear(psi).dot(p).real();
  }
  return acc;
}

double form_awmse(const QuadraticForm& f, const CMatrix& precoders, const StreamLayout& layout,
                  int user, int stream) {
  return f.mn + (form_trace(f, precoders, layout, user, stream) - f.mn - f.logdet_b) / kLn2;
}

CVector DenseQuadraticForm::apply_c(const CVector& p_vec) const {
  const Eigen::Index rows = g.cols();
  if (p_vec.size() % rows != 0) throw DimensionError("apply_c: length mismatch");
  Eigen::Map<const CMatrix> p(p_vec.data(), rows, p_vec.size() / rows);
  const CMatrix gp = g * p;
  return Eigen::Map<const CVector>(gp.data(), gp.size());
}

double DenseQuadraticForm::quadratic(const CVector& p_vec) const {
  return p_vec.dot(apply_c(p_vec)).real();
}

DenseQuadraticForm dense_quadratic_form(const CMatrix& h_dd, const CMatrix& a, const CMatrix& b,
                                        double noise_var) {
  if ((b - b.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    throw ContractViolation("dense_quadratic_form: weight matrix is not Hermitian");
  }
  DenseQuadraticForm f;
  const CMatrix ah = a * h_dd;
  f.g = ah.adjoint() * b * ah;
  const CMatrix dm = ah.adjoint() * b;
  f.d = Eigen::Map<const CVector>(dm.data(), dm.size());
  Eigen::LLT<CMatrix> llt(b);
  if (llt.info() != Eigen::Success) throw ContractViolation("dense_quadratic_form: weight must be positive definite");
  f.scalar = noise_var * (b * a * a.adjoint()).trace().real() + b.trace().real() - logdet_llt(llt) / kLn2;
  return f;
}

SafForms compute_saf_forms(const PreparedSampleSet& samples, const CMatrix& precoders,
                           const StreamLayout& layout) {
  if (samples.num_samples() < 1) throw InvalidParameter("compute_saf_forms: empty sample set");
  if (samples.num_users() != layout.num_users) throw DimensionError("sample set / layout user mismatch");
  const int mn = samples.grid.size();
  const int num_streams = layout.num_streams();

  SafForms out;
  out.forms.resize(static_cast<std::size_t>(num_streams));
  out.rates.resize(static_cast<std::size_t>(num_streams));
  std::vector<std::vector<int>> slot(static_cast<std::size_t>(layout.num_users),
                                     std::vector<int>(static_cast<std::size_t>(num_streams), -1));
  for (int j = 0; j < num_streams; ++j) {
    const auto& dec = layout.streams[static_cast<std::size_t>(j)].decoders;
    for (std::size_t k = 0; k < dec.size(); ++k) {
      QuadraticForm z;
      z.mn = mn;
      z.n_t = samples.n_t;
      z.quad = CMatrix::Zero(mn, samples.n_t * samples.n_t);
      z.lin = CMatrix::Zero(mn, samples.n_t);
      out.forms[j].push_back(std::move(z));
      out.rates[j].push_back(0.0);
      slot[static_cast<std::size_t>(dec[k])][static_cast<std::size_t>(j)] = static_cast<int>(k);
    }
  }

  std::vector<CMatrix> gram(static_cast<std::size_t>(num_streams));
  for (int u = 0; u < layout.num_users; ++u) {
    for (const auto& ch : samples.users[static_cast<std::size_t>(u)]) {
      const auto w = stream_responses(ch, precoders, layout);
      for (int j = 0; j < num_streams; ++j) gram[j].noalias() = w[j] * w[j].adjoint();
      for (int j = 0; j < num_streams; ++j) {
        const int k = slot[u][j];
        if (k < 0) continue;
        CMatrix t = ch.noise_var * CMatrix::Identity(mn, mn);
        for (int r : layout.residual_streams(u, j)) t += gram[r];
        const MmsePair m = mmse_pair(w[j], t);
        const QuadraticForm f = quadratic_form(ch, m.a, m.b, m.logdet_b);
        auto& acc = out.forms[j][k];
        acc.quad += f.quad;
        acc.lin += f.lin;
        acc.trace_const += f.trace_const;
        acc.logdet_b += f.logdet_b;
        out.rates[j][k] += m.logdet_b / kLn2;
      }
    }
  }

  const double inv = 1.0 / samples.num_samples();
  for (int j = 0; j < num_streams; ++j) {
    for (std::size_t k = 0; k < out.forms[j].size(); ++k) {
      auto& f = out.forms[j][k];
      f.quad *= inv;
      f.lin *= inv;
      f.trace_const *= inv;
      f.logdet_b *= inv;
      out.rates[j][k] *= inv;
    }
  }
  return out;
}

}  // namespace otfs_rsma
