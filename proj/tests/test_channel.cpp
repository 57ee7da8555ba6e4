// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "otfs_rsma/channel.hpp"
#include "test_support.hpp"

using namespace otfs_rsma;
using namespace otfs_rsma::testing;

TEST(Steering, Values) {
  const CVector a0 = steering_vector(0.0, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(a0(i) - 1.0), 0.0, 1e-15);
  const CVector a1 = steering_vector(kPi / 2.0, 2);
  EXPECT_NEAR(std::abs(a1(0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(a1(1) + 1.0), 0.0, 1e-15);
  Rng rng(1);
  std::uniform_real_distribution<double> u(-kPi / 2, kPi / 2);
  for (int r = 0; r < 20; ++r) {
    const CVector a = steering_vector(u(rng), 5);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(std::abs(a(i)), 1.0, 1e-14);
  }
  EXPECT_THROW(steering_vector(0.0, 0), DimensionError);
}

TEST(Doppler, ZeroDopplerIsIdentity) {
  const GridConfig g(4, 4, 1.0);
  const CVector d = doppler_matrix(PathParams{}, g);
  EXPECT_LT(max_abs(d - CVector::Ones(16)), 1e-15);
}

TEST(Doppler, HandExample) {
  const GridConfig g(1, 2, 1.0);
  const CVector d = doppler_matrix(integer_path(1.0, 0.0, 0, 1), g);
  EXPECT_NEAR(std::abs(d(0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d(1) + 1.0), 0.0, 1e-15);
}

TEST(Doppler, EntriesFollowIndexConvention) {
  const GridConfig g(3, 4, 1.0);
  PathParams p = integer_path(1.0, 0.0, 0, 1);
  p.doppler_frac = 0.27;
  const CVector d = doppler_matrix(p, g);
  for (int mp = 0; mp < 3; ++mp) {
    for (int np = 0; np < 4; ++np) {
      const cplx want = std::exp(cplx(0.0, 2.0 * kPi * 1.27 / 4.0 * (np + mp / 3.0)));
      EXPECT_NEAR(std::abs(d(np + 4 * mp) - want), 0.0, 1e-14);
      EXPECT_NEAR(std::abs(d(np + 4 * mp)), 1.0, 1e-14);
    }
  }
}

TEST(Delay, ZeroDelayIsIdentity) {
  const GridConfig g(4, 4, 1.0);
  EXPECT_LT((delay_matrix(PathParams{}, g) - RMatrix::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Delay, HandExampleOneBinShift) {
  const GridConfig g(2, 1, 1.0);
  const RMatrix xi = delay_matrix(integer_path(1.0, 0.0, 1, 0), g);
  EXPECT_EQ(xi(0, 0), 0.0);
  EXPECT_EQ(xi(0, 1), 0.0);
  EXPECT_EQ(xi(1, 0), 1.0);
  EXPECT_EQ(xi(1, 1), 0.0);
}

TEST(Delay, FractionalEnergyBound) {
  const GridConfig g(4, 4, 1.0);
  PathParams p;
  p.delay_frac = 0.3;
  const RMatrix xi = delay_matrix(p, g);
  for (int r = 0; r < 16; ++r) EXPECT_LE(xi.row(r).squaredNorm(), 1.0 + 1e-9);
  for (int mp = 0; mp < 4; ++mp) {
    for (int np = 0; np < 4; ++np) {
      for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 4; ++n) {
          const double x = 4.0 * (np - n) + mp - m - 0.3;
          EXPECT_NEAR(xi(np + 4 * mp, n + 4 * m), std::sin(kPi * x) / (kPi * x), 1e-14);
        }
      }
    }
  }
}

TEST(TdChannel, FlatSinglePathIsIdentity) {
  const GridConfig g(4, 2, 1.0);
  const CMatrix h = td_channel({integer_path(1.0, 0.0, 0, 0)}, g, 1);
  EXPECT_LT(max_abs(h - CMatrix::Identity(8, 8)), 1e-15);
}

TEST(TdChannel, IntegerPathIsPhasePermutation) {
  Rng rng(2);
  for (int M : {2, 4}) {
    for (int N : {2, 4}) {
      const GridConfig g(M, N, 1.0);
      for (int l = 0; l < M; ++l) {
        for (int k = -N / 2; k <= N / 2; ++k) {
          const cplx gain = complex_normal(rng, 1.0);
          const auto path = integer_path(gain, 0.3, l, k);
          const CMatrix dx = doppler_matrix(path, g).asDiagonal() * delay_matrix(path, g).cast<cplx>();
          for (int c = 0; c < g.size(); ++c) {
            int nonzero = 0;
            for (int r = 0; r < g.size(); ++r) {
              if (std::abs(dx(r, c)) > 1e-12) {
                ++nonzero;
                EXPECT_NEAR(std::abs(dx(r, c)), 1.0, 1e-12);
              }
            }
            EXPECT_LE(nonzero, 1);
          }
          const CMatrix h = td_channel({path}, g, 2);
          EXPECT_LT(max_abs(h - brute_force_td({path}, g, 2)), 1e-12);
        }
      }
    }
  }
}

TEST(TdChannel, MultiPathMatchesBruteForce) {
  const GridConfig g(4, 4, 1.0);
  std::vector<PathParams> paths{integer_path({0.9, 0.1}, 0.2, 0, 1), integer_path({0.1, -0.2}, -0.7, 2, -1),
                                integer_path({-0.05, 0.3}, 1.1, 3, 2)};
  EXPECT_LT(max_abs(td_channel(paths, g, 3) - brute_force_td(paths, g, 3)), 1e-12);
}

TEST(TdChannel, BroadsideAntennaBlocksAgree) {
  const GridConfig g(2, 4, 1.0);
  PathParams p = integer_path({0.4, 0.3}, 0.0, 1, 1);
  p.delay_frac = 0.2;
  p.doppler_frac = -0.4;
  const CMatrix h = td_channel({p}, g, 2);
  ASSERT_EQ(h.rows(), 8);
  ASSERT_EQ(h.cols(), 16);
  EXPECT_LT(max_abs(h.leftCols(8) - h.rightCols(8)), 1e-15);
}

TEST(TdChannel, FractionalPathFollowsDefinition) {
  const GridConfig g(2, 3, 1.0);
  PathParams p = integer_path({0.4, 0.3}, 0.5, 1, -1);
  p.delay_frac = 0.2;
  p.doppler_frac = 0.35;
  const CMatrix dx = doppler_matrix(p, g).asDiagonal() * delay_matrix(p, g).cast<cplx>();
  const cplx phase = std::exp(cplx(0.0, -2.0 * kPi * (-0.65) * 1.2 / 6.0));
  EXPECT_NEAR(std::abs(path_phase(p, g) - phase), 0.0, 1e-15);
  const CMatrix want = kron(steering_vector(0.5, 2).transpose(), dx) * (p.gain * phase);
  EXPECT_LT(max_abs(td_channel({p}, g, 2) - want), 1e-14);
  EXPECT_THROW(td_channel({}, g, 2), InvalidParameter);
}

TEST(EffectiveDd, UnitaryAndKroneckerOracle) {
  Rng rng(3);
  const GridConfig g(2, 2, 1.0);
  const CMatrix h = random_cmatrix(rng, 4, 8);
  const CMatrix hdd = effective_dd_channel(h, g);
  EXPECT_NEAR(hdd.norm(), h.norm(), 1e-10);
  EXPECT_LT(max_abs(hdd - kron_fnh_im(2, 2).adjoint() * h), 1e-12);
  const GridConfig g1(4, 1, 1.0);
  const CMatrix h1 = random_cmatrix(rng, 4, 8);
  EXPECT_LT(max_abs(effective_dd_channel(h1, g1) - h1), 1e-15);
  EXPECT_THROW(effective_dd_channel(random_cmatrix(rng, 3, 8), g), DimensionError);
}

TEST(Quantize, SplitsOnNearestInteger) {
  const GridConfig g(4, 4, 1000.0);
  // 2.3 delay bins and -1.6 Doppler bins
  const PathParams p = quantize_path(1.0, 0.0, 2.3 / (4 * 1000.0), -1.6 * 1000.0 / 4.0, g, false);
  EXPECT_EQ(p.delay_int, 2);
  EXPECT_NEAR(p.delay_frac, 0.3, 1e-12);
  EXPECT_EQ(p.doppler_int, -2);
  EXPECT_NEAR(p.doppler_frac, 0.4, 1e-12);
  const PathParams half = quantize_path(1.0, 0.0, 1.5 / (4 * 1000.0), 0.0, g, false);
  EXPECT_EQ(half.delay_int, 2);
  EXPECT_DOUBLE_EQ(half.delay_frac, -0.5);
}

TEST(SamplePaths, RespectBoundsAndDeterminism) {
  const GridConfig g(4, 4, 480e3);
  ChannelProfile prof;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto paths = sample_paths(g, prof, s);
    ASSERT_EQ(paths.size(), 3u);
    EXPECT_TRUE(paths[0].is_los);
    EXPECT_NEAR(std::abs(paths[0].gain), std::sqrt(10.0 / 11.0), 1e-12);
    for (const auto& p : paths) {
      EXPECT_NO_THROW(validate_path(p, g));
      EXPECT_GE(p.delay_bins(), paths[0].delay_bins() - 1e-12);
      EXPECT_GE(p.aod, -kPi / 2);
      EXPECT_LT(p.aod, kPi / 2);
    }
    EXPECT_EQ(paths, sample_paths(g, prof, s));
  }
  EXPECT_NE(sample_paths(g, prof, 1), sample_paths(g, prof, 2));
}

TEST(SamplePaths, RicianLimitAndErrors) {
  const GridConfig g(4, 4, 480e3);
  ChannelProfile prof;
  prof.rician_factor = 1e12;
  const auto paths = sample_paths(g, prof, 9);
  EXPECT_NEAR(std::abs(paths[0].gain), 1.0, 1e-6);
  for (std::size_t q = 1; q < paths.size(); ++q) EXPECT_LT(std::norm(paths[q].gain), 1e-9);
  prof.num_nlos = -1;
  EXPECT_THROW(sample_paths(g, prof, 1), InvalidParameter);
}

TEST(SamplePaths, RicianPowerRatio) {
  // each NLoS path carries 1/(gamma+1), so LoS/NLoS power is gamma/Q
  const GridConfig g(4, 4, 480e3);
  for (int q : {1, 2}) {
    ChannelProfile prof;  // 10 dB
    prof.num_nlos = q;
    double los = 0.0;
    double nlos = 0.0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
      const auto paths = sample_paths(g, prof, derive_seed(77, {s}));
      los += std::norm(paths[0].gain);
      for (std::size_t k = 1; k < paths.size(); ++k) nlos += std::norm(paths[k].gain);
    }
    const double want = 10.0 / q;
    EXPECT_NEAR(los / nlos, want, 0.05 * want) << "Q=" << q;
  }
}

TEST(SamplePaths, IdealizeDropsFractions) {
  const GridConfig g(4, 4, 480e3);
  const auto paths = sample_paths(g, ChannelProfile{}, 5);
  const auto ideal = idealize_paths(paths);
  for (std::size_t q = 0; q < paths.size(); ++q) {
    EXPECT_EQ(ideal[q].delay_frac, 0.0);
    EXPECT_EQ(ideal[q].doppler_frac, 0.0);
    EXPECT_EQ(ideal[q].delay_int, paths[q].delay_int);
    EXPECT_EQ(ideal[q].doppler_int, paths[q].doppler_int);
    EXPECT_EQ(ideal[q].gain, paths[q].gain);
  }
}

TEST(ValidatePath, RejectsOutOfBound) {
  const GridConfig g(4, 4, 1.0);
  PathParams p;
  p.delay_int = 5;
  EXPECT_THROW(validate_path(p, g), InvalidParameter);
  p = PathParams{};
  p.doppler_int = 5;
  EXPECT_THROW(validate_path(p, g), InvalidParameter);
  p = PathParams{};
  p.delay_frac = 0.5;
  EXPECT_THROW(validate_path(p, g), InvalidParameter);
}

TEST(Csit, ErrorVarianceFormula) {
  EXPECT_DOUBLE_EQ(csit_error_variance(0.0, 1000.0, 2), 0.5);
  EXPECT_DOUBLE_EQ(csit_error_variance(1.0, 0.001, 3), 0.001);
  EXPECT_NEAR(csit_error_variance(0.7, 0.001, 2), 0.25549, 1e-12);
  EXPECT_THROW(csit_error_variance(0.5, 1.0, 0), InvalidParameter);
  EXPECT_THROW(CsitModel::with_error_variance(-1.0, 3), InvalidParameter);
  EXPECT_THROW(CsitModel::with_error_variance(0.1, 0), InvalidParameter);
}

TEST(Csit, ZeroErrorReproducesEstimate) {
  const GridConfig g(2, 2, 480e3);
  const auto est = make_user_channel(sample_paths(g, ChannelProfile{}, 3), g, 2, 10.0);
  const auto s = sample_csit_realizations(est, g, 2, CsitModel::with_error_variance(0.0, 5), 11);
  ASSERT_EQ(s.realizations.size(), 5u);
  for (const auto& h : s.realizations) EXPECT_EQ(h, s.nominal);
  EXPECT_LT(max_abs(s.nominal - effective_dd_channel(est.h_td, g)), 1e-15);
}

TEST(Csit, ForcedNominalAndDeterminism) {
  const GridConfig g(2, 2, 480e3);
  const auto est = make_user_channel(sample_paths(g, ChannelProfile{}, 3), g, 2, 10.0);
  const auto csit = CsitModel::with_error_variance(0.3, 4);
  const auto a = sample_csit_realizations(est, g, 2, csit, 11, true);
  const auto b = sample_csit_realizations(est, g, 2, csit, 11, true);
  EXPECT_EQ(a.realizations.front(), a.nominal);
  for (std::size_t l = 0; l < a.realizations.size(); ++l) EXPECT_EQ(a.realizations[l], b.realizations[l]);
  EXPECT_NE(a.realizations[1], a.realizations[2]);
}

TEST(Csit, UnbiasedWithStructuredVariance) {
  const GridConfig g(2, 2, 480e3);
  const auto est = make_user_channel(sample_paths(g, ChannelProfile{}, 8), g, 1, 10.0);
  const double var = 0.2;
  const int L = 5000;
  const auto s = sample_csit_realizations(est, g, 1, CsitModel::with_error_variance(var, L), 21);
  CMatrix mean = CMatrix::Zero(s.nominal.rows(), s.nominal.cols());
  for (const auto& h : s.realizations) mean += h;
  mean /= L;
  RMatrix emp_var = RMatrix::Zero(s.nominal.rows(), s.nominal.cols());
  for (const auto& h : s.realizations) emp_var += (h - s.nominal).cwiseAbs2();
  emp_var /= L;
  // per-entry variance of sum_q e_q B_q is var * sum_q |B_q(r, c)|^2
  RMatrix structural = RMatrix::Zero(s.nominal.rows(), s.nominal.cols());
  for (const auto& p : est.paths) {
    PathParams unit = p;
    unit.gain = 1.0;
    structural += effective_dd_channel(td_channel({unit}, g, 1), g).cwiseAbs2();
  }
  for (Eigen::Index r = 0; r < mean.rows(); ++r) {
    for (Eigen::Index c = 0; c < mean.cols(); ++c) {
      const double sd = std::sqrt(var * structural(r, c));
      EXPECT_LE(std::abs(mean(r, c) - s.nominal(r, c)), 3.0 * sd / std::sqrt(L) + 1e-12);
      if (structural(r, c) > 1e-3) {
        EXPECT_NEAR(emp_var(r, c) / (var * structural(r, c)), 1.0, 0.1);
      }
    }
  }
}

TEST(SampleSetTest, PerUserStreams) {
  const GridConfig g(2, 2, 480e3);
  std::vector<UserChannel> est;
  for (int u = 0; u < 3; ++u) est.push_back(make_user_channel(sample_paths(g, ChannelProfile{}, u), g, 2, 10.0));
  const auto set = build_sample_set(est, g, 2, CsitModel::with_error_variance(0.1, 3), 5);
  EXPECT_EQ(set.num_users(), 3);
  EXPECT_EQ(set.num_samples(), 3);
  EXPECT_NE(set.users[0].realizations[0] - set.users[0].nominal, set.users[1].realizations[0] - set.users[1].nominal);
}

TEST(MatrixFile, RoundTripsAtSinglePrecision) {
  Rng rng(4);
  const CMatrix m = random_cmatrix(rng, 5, 7);
  const auto file = std::filesystem::temp_directory_path() / "otfs_rsma_matrix_test.otfsmat";
  write_matrix_file(file, m);
  EXPECT_EQ(std::filesystem::file_size(file), 16u + 5u * 7u * 8u);
  const CMatrix back = read_matrix_file(file);
  ASSERT_EQ(back.rows(), 5);
  ASSERT_EQ(back.cols(), 7);
  EXPECT_LT(max_abs(back - m), 1e-6);
  std::filesystem::remove(file);
}
