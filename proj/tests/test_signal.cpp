// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "otfs_rsma/baselines.hpp"
#include "otfs_rsma/signal.hpp"
#include "test_support.hpp"

using namespace otfs_rsma;
using namespace otfs_rsma::testing;

namespace {

StreamLayout scalar_sdma_layout(int users) { return build_layout(Strategy::Sdma, users, 1); }

// Dense chain: explicit H~ and P~_j, nothing folded.
std::vector<CMatrix> dense_effective_precoders(const CMatrix& precoders, const StreamLayout& layout,
                                               const GridConfig& g) {
  std::vector<CMatrix> out;
  for (int j = 0; j < layout.num_streams(); ++j) {
    out.push_back(effective_precoder(precoders.row(j).transpose(), layout.streams[j].arrangement, g));
  }
  return out;
}

}  // namespace

TEST(Strategy, ParseAndPrint) {
  EXPECT_EQ(parse_strategy("RSMA"), Strategy::Rsma);
  EXPECT_EQ(parse_strategy("sdma"), Strategy::Sdma);
  EXPECT_EQ(parse_strategy("Noma"), Strategy::Noma);
  EXPECT_EQ(to_string(Strategy::Rsma), "rsma");
  EXPECT_THROW(parse_strategy("ofdma"), InvalidParameter);
}

TEST(Layout, DecodingRelations) {
  const StreamLayout l = build_layout(Strategy::Rsma, 3, 4);
  // user 1 decoding its private stream (index 2): the common stream is
  // already removed, the other privates remain
  EXPECT_FALSE(l.interferes(1, 2, 0));
  EXPECT_TRUE(l.interferes(1, 2, 1));
  EXPECT_TRUE(l.interferes(1, 2, 3));
  EXPECT_FALSE(l.interferes(1, 2, 2));
  EXPECT_EQ(l.residual_streams(1, 2), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(l.residual_streams(1, 0), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(l.num_singleton_streams(), 3);
}

TEST(Layout, ValidateRejectsMalformed) {
  StreamLayout l = build_layout(Strategy::Sdma, 2, 4);
  EXPECT_NO_THROW(l.validate(4));
  EXPECT_THROW(l.validate(5), ContractViolation);
  l.streams[0].arrangement(1) = 0.5;
  EXPECT_THROW(l.validate(4), ContractViolation);
  l = build_layout(Strategy::Sdma, 2, 4);
  l.streams[0].beneficiaries = {1};
  EXPECT_THROW(l.validate(4), ContractViolation);
  l = build_layout(Strategy::Sdma, 2, 4);
  l.streams[1].decoders = {2};
  EXPECT_THROW(l.validate(4), ContractViolation);
}

TEST(EffectivePrecoder, TrivialAndNorm) {
  const GridConfig g1(3, 1, 1.0);
  CVector one(1);
  one << 1.0;
  EXPECT_LT(max_abs(effective_precoder(one, RVector::Ones(3), g1) - CMatrix::Identity(3, 3)), 1e-15);

  Rng rng(1);
  const GridConfig g(2, 4, 1.0);
  const CVector p = random_cvector(rng, 3);
  RVector psi = RVector::Ones(8);
  psi(2) = 0.0;
  psi(5) = 0.0;
  const CMatrix pt = effective_precoder(p, psi, g);
  EXPECT_NEAR(pt.squaredNorm(), p.squaredNorm() * 6.0, 1e-12);
}

TEST(EffectivePrecoder, MatchesEntrywiseDefinition) {
  Rng rng(2);
  const GridConfig g(2, 2, 1.0);
  const CVector p = random_cvector(rng, 2);
  RVector psi(4);
  psi << 1, 0, 1, 1;
  const CMatrix u = kron_fnh_im(2, 2);
  const CMatrix pt = effective_precoder(p, psi, g);
  for (int b = 0; b < 2; ++b) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(std::abs(pt(b * 4 + r, c) - p(b) * u(r, c) * psi(c)), 0.0, 1e-15);
    }
  }
}

TEST(Covariances, ZeroPrecodersGiveNoise) {
  Rng rng(3);
  const auto ch = random_prepared(rng, 4, 2);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
  const auto cov = received_covariances(ch, CMatrix::Zero(3, 2), l, 0, 0);
  EXPECT_LT(max_abs(cov.T - CMatrix::Identity(4, 4)), 1e-15);
  EXPECT_LT(max_abs(cov.K - CMatrix::Identity(4, 4)), 1e-15);
}

TEST(Covariances, ScalarExpansion) {
  const GridConfig g(1, 1, 1.0);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 1);
  PreparedChannel ch;
  ch.hu = {CMatrix::Constant(1, 1, cplx(0.7, -0.2))};
  const cplx h = ch.hu[0](0, 0);
  CMatrix p(3, 1);
  p << cplx(0.5, 0.5), cplx(1.0, -0.3), cplx(-0.4, 0.2);
  const auto cc = received_covariances(ch, p, l, 0, 0);
  const double want_t = std::norm(h * p(0, 0)) + std::norm(h * p(1, 0)) + std::norm(h * p(2, 0)) + 1.0;
  EXPECT_NEAR(cc.T(0, 0).real(), want_t, 1e-14);
  EXPECT_NEAR(cc.K(0, 0).real(), want_t - std::norm(h * p(0, 0)), 1e-14);
  const auto cp = received_covariances(ch, p, l, 0, 1);
  EXPECT_NEAR(cp.T(0, 0).real(), std::norm(h * p(1, 0)) + std::norm(h * p(2, 0)) + 1.0, 1e-14);
  EXPECT_NEAR(cp.K(0, 0).real(), std::norm(h * p(2, 0)) + 1.0, 1e-14);
}

TEST(Covariances, FoldedMatchesDenseAndIsOrdered) {
  Rng rng(4);
  const GridConfig g(2, 2, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix h_dd = random_cmatrix(rng, 4, 8);
    const auto ch = prepare_channel(h_dd, g, 2);
    StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
    l.streams[2].arrangement(1) = 0.0;
    const CMatrix p = random_precoders(rng, 3, 2, 5.0);
    const auto pt = dense_effective_precoders(p, l, g);
    for (int u = 0; u < 2; ++u) {
      for (int j : {0, 1 + u}) {
        const auto a = received_covariances(ch, p, l, u, j);
        const auto b = received_covariances_dense(h_dd, pt, l, u, j, 1.0);
        EXPECT_LT(max_abs(a.T - b.T), 1e-12);
        EXPECT_LT(max_abs(a.K - b.K), 1e-12);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(a.T - a.K);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
        Eigen::SelfAdjointEigenSolver<CMatrix> ek(a.K);
        EXPECT_GE(ek.eigenvalues().minCoeff(), 1.0 - 1e-9);
      }
    }
  }
}

TEST(Rates, ScalarShannon) {
  const StreamLayout l = scalar_sdma_layout(1);
  PreparedChannel ch;
  ch.hu = {CMatrix::Constant(1, 1, cplx(1.0, 0.0))};
  for (double pw : {0.1, 1.0, 10.0, 1000.0}) {
    CMatrix p(1, 1);
    p << std::sqrt(pw);
    EXPECT_NEAR(instantaneous_rates({ch}, p, l)(0, 0), std::log2(1.0 + pw), 1e-12);
  }
  EXPECT_EQ(instantaneous_rates({ch}, CMatrix::Zero(1, 1), l)(0, 0), 0.0);
}

TEST(Rates, LogDetAgreesWithEigenvalues) {
  Rng rng(5);
  for (int n : {1, 2, 4, 8, 16}) {
    const CMatrix m = random_hpd(rng, n, 0.5);
    EXPECT_NEAR(log2det_hpd(m), eig_log2det(m), 1e-8);
  }
  EXPECT_THROW(log2det_hpd(-CMatrix::Identity(2, 2)), SolverError);
}

TEST(Rates, MatchDenseDefinition) {
  Rng rng(6);
  const GridConfig g(2, 2, 1.0);
  const CMatrix h_dd = random_cmatrix(rng, 4, 8);
  const auto ch = prepare_channel(h_dd, g, 2);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
  const CMatrix p = random_precoders(rng, 3, 2, 10.0);
  const auto pt = dense_effective_precoders(p, l, g);
  const RVector r = user_stream_rates(ch, p, l, 1);
  for (int j : {0, 2}) {
    const auto cov = received_covariances_dense(h_dd, pt, l, 1, j, 1.0);
    // log2 det(I + Gamma) with Gamma = W^H K^-1 W
    const CMatrix w = h_dd * pt[j];
    const CMatrix gamma = w.adjoint() * cov.K.inverse() * w;
    EXPECT_NEAR(r(j), eig_log2det(CMatrix::Identity(4, 4) + gamma), 1e-9);
  }
  EXPECT_EQ(r(1), 0.0);
}

TEST(Rates, PhaseRotationInvariance) {
  Rng rng(7);
  const auto ch0 = random_prepared(rng, 4, 2);
  const auto ch1 = random_prepared(rng, 4, 2);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
  CMatrix p = random_precoders(rng, 3, 2, 4.0);
  const RMatrix base = instantaneous_rates({ch0, ch1}, p, l);
  p.row(1) *= std::polar(1.0, 1.234);
  p.row(0) *= std::polar(1.0, -0.5);
  EXPECT_LT((instantaneous_rates({ch0, ch1}, p, l) - base).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rates, SdmaIsRsmaWithoutCommonPower) {
  Rng rng(8);
  const auto ch0 = random_prepared(rng, 4, 2);
  const auto ch1 = random_prepared(rng, 4, 2);
  const StreamLayout rs = build_layout(Strategy::Rsma, 2, 4);
  const StreamLayout sd = build_layout(Strategy::Sdma, 2, 4);
  const CMatrix priv = random_precoders(rng, 2, 2, 4.0);
  CMatrix p = CMatrix::Zero(3, 2);
  p.bottomRows(2) = priv;
  const RMatrix a = instantaneous_rates({ch0, ch1}, p, rs);
  const RMatrix b = instantaneous_rates({ch0, ch1}, priv, sd);
  EXPECT_LT((a.bottomRows(2) - b).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(a.row(0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rates, ScalarPowerMonotone) {
  const StreamLayout l = build_layout(Strategy::Rsma, 1, 1);
  PreparedChannel ch;
  ch.hu = {CMatrix::Constant(1, 1, cplx(0.3, 0.8))};
  CMatrix p(2, 1);
  p << 0.6, cplx(0.2, 0.4);
  double prev = sum_rate(instantaneous_rates({ch}, p, l), l);
  for (double a = 1.5; a < 50.0; a *= 1.5) {
    const double r = sum_rate(instantaneous_rates({ch}, a * p, l), l);
    EXPECT_GE(r, prev - 1e-12);
    prev = r;
  }
}

TEST(Rates, SampleAverage) {
  Rng rng(9);
  const GridConfig g(2, 1, 1.0);
  const auto set = random_sample_set(rng, g, 2, 2, 4);
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 2);
  const CMatrix p = random_precoders(rng, 3, 2, 3.0);
  RMatrix want = RMatrix::Zero(3, 2);
  for (int s = 0; s < 4; ++s) want += instantaneous_rates({set.users[0][s], set.users[1][s]}, p, l);
  want /= 4.0;
  EXPECT_LT((sample_average_rates(set, p, l) - want).cwiseAbs().maxCoeff(), 1e-12);

  PreparedSampleSet single{g, 2, {{set.users[0][2]}, {set.users[1][2]}}};
  EXPECT_LT((sample_average_rates(single, p, l) -
             instantaneous_rates({set.users[0][2], set.users[1][2]}, p, l)).cwiseAbs().maxCoeff(), 0.0 + 1e-15);
  PreparedSampleSet same{g, 2, {{set.users[0][1], set.users[0][1]}, {set.users[1][1], set.users[1][1]}}};
  EXPECT_LT((sample_average_rates(same, p, l) -
             instantaneous_rates({set.users[0][1], set.users[1][1]}, p, l)).cwiseAbs().maxCoeff(), 1e-12);
  PreparedSampleSet empty{g, 2, {{}, {}}};
  EXPECT_THROW(sample_average_rates(empty, p, l), InvalidParameter);
}

TEST(CommonSplit, Policies) {
  RVector one(1);
  one << 3.0;
  EXPECT_DOUBLE_EQ(split_common_rate(one)(0), 3.0);
  RVector two(2);
  two << 2.0, 3.0;
  EXPECT_DOUBLE_EQ(split_common_rate(two).sum(), 2.0);
  RVector mu(2);
  mu << -0.5, -0.7;
  RVector rates(2);
  rates << 1.5, 1.3;
  const RVector c = split_common_rate(rates, mu);
  EXPECT_DOUBLE_EQ(c(0), 0.5);
  EXPECT_DOUBLE_EQ(c(1), 0.7);
  EXPECT_LE(c.sum(), rates.minCoeff() + 1e-9);
  rates << 1.0, 1.1;
  EXPECT_THROW(split_common_rate(rates, mu), ContractViolation);
  rates << -1.0, 1.0;
  EXPECT_THROW(split_common_rate(rates), InvalidParameter);
}

TEST(RateReportTest, NormalizedAndFeasible) {
  const StreamLayout l = build_layout(Strategy::Rsma, 2, 4);
  RMatrix r(3, 2);
  r << 8.0, 6.0, 10.0, 0.0, 0.0, 12.0;
  RMatrix split = RMatrix::Zero(3, 2);
  split(0, 0) = 2.0;
  split(0, 1) = 4.0;
  const RateReport rep = make_rate_report(r, l, 4, split);
  EXPECT_DOUBLE_EQ(rep.stream_rates(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(rep.allocation(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(rep.allocation(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(rep.user_totals(0), 0.5 + 2.5);
  EXPECT_DOUBLE_EQ(rep.user_totals(1), 1.0 + 3.0);
  EXPECT_DOUBLE_EQ(rep.sum_rate, 7.0);
  EXPECT_LE(rep.allocation.row(0).sum(), rep.stream_rates.row(0).minCoeff() + 1e-9);
  EXPECT_DOUBLE_EQ(rep.common_rates(l)(1), 1.5);
  EXPECT_DOUBLE_EQ(rep.private_rates(l)(1), 3.0);
  EXPECT_NEAR(rep.sum_rate * 4, sum_rate(r, l), 1e-12);
  split(0, 1) = 5.0;
  EXPECT_THROW(make_rate_report(r, l, 4, split), ContractViolation);
}

TEST(NomaRates, MinOverDecoders) {
  RVector gains(2);
  gains << 1.0, 0.5;  // user 1 is weaker
  const StreamLayout l = build_layout(Strategy::Noma, 2, 4, gains);
  RMatrix r(2, 2);
  r << 5.0, 3.0, 7.0, 0.0;
  EXPECT_DOUBLE_EQ(stream_capacity(r, l)(0), 3.0);
  EXPECT_DOUBLE_EQ(sum_rate(r, l), 10.0);
}
