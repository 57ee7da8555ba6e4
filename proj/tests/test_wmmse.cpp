// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "otfs_rsma/baselines.hpp"
#include "otfs_rsma/wmmse.hpp"
#include "test_support.hpp"

using namespace otfs_rsma;
using namespace otfs_rsma::testing;

namespace {

// T for (user, stream) from explicit responses.
CMatrix residual_covariance(const std::vector<CMatrix>& w, const StreamLayout& l, int u, int j, double nv) {
  const int mn = static_cast<int>(w.front().rows());
  CMatrix t = nv * CMatrix::Identity(mn, mn);
  for (int r : l.residual_streams(u, j)) t += w[r] * w[r].adjoint();
  return t;
}

}  // namespace

TEST(Mmse, ScalarClosedForm) {
  CMatrix w(1, 1), t(1, 1);
  w << cplx(1.2, -0.4);
  t << std::norm(w(0, 0)) + 0.7;
  const MmsePair m = mmse_pair(w, t);
  EXPECT_NEAR(std::abs(m.a(0, 0) - std::conj(w(0, 0)) / t(0, 0)), 0.0, 1e-15);
  const double e = 1.0 - std::norm(w(0, 0)) / t(0, 0).real();
  EXPECT_NEAR(m.e(0, 0).real(), e, 1e-15);
  EXPECT_NEAR(m.b(0, 0).real(), 1.0 / e, 1e-12);
  EXPECT_NEAR(awmse(m.b, m.e), 1.0 - std::log2(t(0, 0).real() / 0.7), 1e-12);
}

TEST(Mmse, PairMatchesGenericDefinitions) {
  Rng rng(1);
  for (int mn : {1, 2, 4, 8}) {
    const CMatrix w = random_cmatrix(rng, mn, mn);
    const CMatrix k = random_hpd(rng, mn, 1.0);
    const CMatrix t = k + w * w.adjoint();
    const MmsePair m = mmse_pair(w, t);
    EXPECT_LT(max_abs(m.a - w.adjoint() * t.inverse()), 1e-10);
    EXPECT_LT(max_abs(m.e - mse_matrix(m.a, w, t)), 1e-10);
    EXPECT_LT(max_abs(m.b - m.e.inverse()), 1e-8);
    EXPECT_LT(max_abs(mmse_equalizer(w, t) - m.a), 1e-12);
    EXPECT_LT(max_abs(mmse_weight(m.e) - m.b), 1e-8);
    EXPECT_NEAR(m.logdet_b / std::log(2.0), eig_log2det(m.b), 1e-8);
    // rate identity: minimum AWMSE = MN - (log2 det T - log2 det K)
    const double rate = eig_log2det(t) - eig_log2det(k);
    EXPECT_NEAR(awmse(m.b, m.e), mn - rate, 1e-8);
    EXPECT_NEAR(awmse_log2(m.b, m.e), mn - rate, 1e-8);
  }
}

TEST(Mmse, AwmseBoundsRateFromAbove) {
  Rng rng(2);
  const int mn = 4;
  const CMatrix w = random_cmatrix(rng, mn, mn);
  const CMatrix k = random_hpd(rng, mn, 1.0);
  const CMatrix t = k + w * w.adjoint();
  const MmsePair m = mmse_pair(w, t);
  const double best = awmse(m.b, m.e);
  for (int trial = 0; trial < 50; ++trial) {
    const CMatrix a = m.a + 0.1 * random_cmatrix(rng, mn, mn);
    const CMatrix e = mse_matrix(a, w, t);
    EXPECT_GE(awmse(m.b, e), best - 1e-10);
    const CMatrix b = m.b + 0.05 * random_hpd(rng, mn, 0.0);
    EXPECT_GE(awmse(b, m.e), best - 1e-10);
    EXPECT_GE(awmse(mmse_weight(e), e), best - 1e-10);
  }
}

TEST(Mmse, RejectsIndefiniteInputs) {
  const CMatrix w = CMatrix::Identity(2, 2);
  EXPECT_THROW(mmse_equalizer(w, -CMatrix::Identity(2, 2)), SolverError);
  EXPECT_THROW(mmse_pair(w, -CMatrix::Identity(2, 2)), SolverError);
  EXPECT_THROW(awmse(-CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)), ContractViolation);
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(mmse_equalizer(bad, CMatrix::Identity(2, 2)), InvalidParameter);
}

TEST(QuadraticFormTest, TraceMatchesDenseMse) {
  Rng rng(3);
  const GridConfig g(2, 2, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix h_dd = random_cmatrix(rng, 4, 8);
    const auto ch = prepare_channel(h_dd, g, 2, 0.8);
    StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
    l.streams[1].arrangement(3) = 0.0;
    const CMatrix a = random_cmatrix(rng, 4, 4);
    const CMatrix b = random_hpd(rng, 4, 0.3);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(b);
    const double logdet = es.eigenvalues().array().log().sum();
    const QuadraticForm f = quadratic_form(ch, a, b, logdet);
    // forms are polynomial in the precoders: any point, not only the one they came from
    const CMatrix p = random_precoders(rng, 3, 2, 7.0);
    std::vector<CMatrix> w;
    for (int j = 0; j < 3; ++j) {
      w.push_back(h_dd * effective_precoder(p.row(j).transpose(), l.streams[j].arrangement, g));
    }
    for (int u = 0; u < 2; ++u) {
      for (int j : {0, 1 + u}) {
        const CMatrix t = residual_covariance(w, l, u, j, 0.8);
        const CMatrix e = mse_matrix(a, w[j], t);
        EXPECT_NEAR(form_trace(f, p, l, u, j), (b * e).trace().real(), 1e-9);
        EXPECT_NEAR(form_awmse(f, p, l, u, j), awmse(b, e), 1e-9);
      }
    }
  }
}

TEST(QuadraticFormTest, ReducedHessianIsHermitianPsd) {
  Rng rng(4);
  const auto ch = random_prepared(rng, 4, 3);
  const CMatrix b = random_hpd(rng, 4, 0.2);
  const QuadraticForm f = quadratic_form(ch, random_cmatrix(rng, 4, 4), b, 0.0);
  RVector psi = RVector::Ones(4);
  psi(0) = 0.0;
  const CMatrix q = f.reduced_quadratic(psi);
  EXPECT_LT(max_abs(q - q.adjoint()), 1e-12);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(q);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  EXPECT_TRUE(f.reduced_linear(RVector::Zero(4)).isZero());
  EXPECT_THROW(quadratic_form(ch, CMatrix::Identity(4, 4), random_cmatrix(rng, 4, 4), 0.0), ContractViolation);
  EXPECT_THROW(quadratic_form(ch, CMatrix::Identity(3, 3), CMatrix::Identity(3, 3), 0.0), DimensionError);
}

TEST(DenseForm, KroneckerApplyAndValue) {
  Rng rng(5);
  const GridConfig g(2, 2, 1.0);
  const CMatrix h_dd = random_cmatrix(rng, 4, 8);
  const CMatrix a = random_cmatrix(rng, 4, 4);
  const CMatrix b = random_hpd(rng, 4, 0.5);
  const DenseQuadraticForm f = dense_quadratic_form(h_dd, a, b, 1.0);
  const CMatrix c = kron(CMatrix::Identity(4, 4), f.g);
  const CVector v = random_cvector(rng, 8 * 4);
  EXPECT_LT(max_abs(f.apply_c(v) - c * v), 1e-10);
  EXPECT_NEAR(f.quadratic(v), v.dot(c * v).real(), 1e-9);

  // single-stream AWMSE through the dense form
  const CMatrix pt = effective_precoder(random_cvector(rng, 2), RVector::Ones(4), g);
  const CVector pv = Eigen::Map<const CVector>(pt.data(), pt.size());
  const CMatrix w = h_dd * pt;
  const CMatrix t = CMatrix::Identity(4, 4) + w * w.adjoint();
  const double dense = f.quadratic(pv) - 2.0 * f.d.dot(pv).real() + f.scalar;
  EXPECT_NEAR(dense, awmse_log2(b, mse_matrix(a, w, t)), 1e-9);
}

TEST(SafFormsTest, AverageAndRates) {
  Rng rng(6);
  const GridConfig g(2, 2, 1.0);
  const auto set = random_sample_set(rng, g, 2, 2, 3);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
  const CMatrix p = random_precoders(rng, 3, 2, 5.0);
  const SafForms sf = compute_saf_forms(set, p, l);
  const RMatrix avg = sample_average_rates(set, p, l);
  ASSERT_EQ(sf.forms.size(), 3u);
  ASSERT_EQ(sf.forms[0].size(), 2u);
  for (int j = 0; j < 3; ++j) {
    const auto& dec = l.streams[j].decoders;
    for (std::size_t k = 0; k < dec.size(); ++k) {
      EXPECT_NEAR(sf.rates[j][k], avg(j, dec[k]), 1e-9);
      // at the linearization point the averaged AWMSE equals MN minus the average rate
      EXPECT_NEAR(form_awmse(sf.forms[j][k], p, l, dec[k], j), 4.0 - avg(j, dec[k]), 1e-8);
    }
  }
  // per-sample forms averaged by hand
  const int u = 1, j = 2;
  std::vector<QuadraticForm> per;
  for (int s = 0; s < 3; ++s) {
    const auto& ch = set.users[u][s];
    const auto w = stream_responses(ch, p, l);
    const MmsePair m = mmse_pair(w[j], covariances_from_responses(w, l, u, j, 1.0).T);
    per.push_back(quadratic_form(ch, m.a, m.b, m.logdet_b));
  }
  const QuadraticForm mean = saf_average(per);
  EXPECT_LT(max_abs(mean.quad - sf.forms[j][0].quad), 1e-10);
  EXPECT_LT(max_abs(mean.lin - sf.forms[j][0].lin), 1e-10);
  EXPECT_NEAR(mean.trace_const, sf.forms[j][0].trace_const, 1e-10);
  EXPECT_NEAR(mean.logdet_b, sf.forms[j][0].logdet_b, 1e-10);
  EXPECT_THROW(saf_average({}), InvalidParameter);
}
