// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

namespace otfs_rsma {

RVector channel_gains(const std::vector<CMatrix>& nominal_dd) {
  RVector g(static_cast<Eigen::Index>(nominal_dd.size()));
  for (std::size_t u = 0; u < nominal_dd.size(); ++u) g(static_cast<Eigen::Index>(u)) = nominal_dd[u].norm();
  return g;
}

RVector channel_gains(const std::vector<PreparedChannel>& nominal) {
  RVector g(static_cast<Eigen::Index>(nominal.size()));
  for (std::size_t u = 0; u < nominal.size(); ++u) {
    double acc = 0.0;
    for (const auto& h : nominal[u].hu) acc += h.squaredNorm();
    g(static_cast<Eigen::Index>(u)) = std::sqrt(acc);
  }
  return g;
}

std::vector<int> gain_order(const RVector& gains) {
  std::vector<int> order(static_cast<std::size_t>(gains.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gains(a) < gains(b); });
  return order;
}

StreamLayout build_layout(Strategy strategy, int num_users, int mn, const RVector& gains) {
  if (num_users < 1) throw InvalidParameter("build_layout: need at least one user");
  if (mn < 1) throw DimensionError("build_layout: MN must be >= 1");
  StreamLayout layout;
  layout.strategy = strategy;
  layout.num_users = num_users;
  const RVector ones = RVector::Ones(mn);
  std::vector<int> all(static_cast<std::size_t>(num_users));
  std::iota(all.begin(), all.end(), 0);

  if (strategy == Strategy::Rsma) {
    layout.streams.push_back({StreamKind::Common, -1, all, all, ones, true});
  }
  if (strategy == Strategy::Rsma || strategy == Strategy::Sdma) {
    for (int u = 0; u < num_users; ++u) layout.streams.push_back({StreamKind::Private, u, {u}, {u}, ones, true});
  } else {
    if (gains.size() != num_users) throw InvalidParameter("build_layout: NOMA needs one gain per user");
    const std::vector<int> order = gain_order(gains);
    for (int k = 0; k < num_users; ++k) {
      std::vector<int> dec(order.begin() + k, order.end());
      std::sort(dec.begin(), dec.end());
      layout.streams.push_back({StreamKind::Layered, order[static_cast<std::size_t>(k)], dec,
                                {order[static_cast<std::size_t>(k)]}, ones, true});
    }
  }
  layout.validate(mn);
  return layout;
}

StreamLayout noma_as_rsma_layout(int mn, const RVector& gains) {
  if (gains.size() != 2) throw InvalidParameter("noma_as_rsma_layout: defined for two users");
  StreamLayout layout = build_layout(Strategy::Rsma, 2, mn);
  const int weak = gain_order(gains).front();
  layout.streams[0].beneficiaries = {weak};
  layout.streams[static_cast<std::size_t>(1 + weak)].active = false;
  return layout;
}

PrecoderSolution lift_sdma_solution(const PrecoderSolution& sdma, const StreamLayout& rsma_layout,
                                    const PreparedSampleSet& samples) {
  if (rsma_layout.num_streams() != sdma.layout.num_streams() + 1) {
    throw DimensionError("lift_sdma_solution: layouts do not match");
  }
  PrecoderSolution lifted = sdma;
  lifted.layout = rsma_layout;
  for (int j = 1; j < rsma_layout.num_streams(); ++j) {
    lifted.layout.streams[static_cast<std::size_t>(j)].arrangement =
        sdma.layout.streams[static_cast<std::size_t>(j - 1)].arrangement;
  }
  lifted.precoders = CMatrix::Zero(rsma_layout.num_streams(), sdma.precoders.cols());
  lifted.precoders.bottomRows(sdma.precoders.rows()) = sdma.precoders;
  lifted.mu = RMatrix::Zero(rsma_layout.num_streams(), rsma_layout.num_users);
  lifted.saf_rates = sample_average_rates(samples, lifted.precoders, lifted.layout);
  lifted.saf_sum_rate = sum_rate(lifted.saf_rates, lifted.layout);
  return lifted;
}

PrecoderSolution lift_noma_solution(const PrecoderSolution& noma, const StreamLayout& rsma_layout,
                                    const PreparedSampleSet& samples) {
  if (noma.layout.num_users != 2 || rsma_layout.num_users != 2 || rsma_layout.num_streams() != 3 ||
      noma.layout.num_streams() != 2) {
    throw DimensionError("lift_noma_solution: defined for two users");
  }
  const int weak = noma.layout.streams[0].owner;
  const int strong = noma.layout.streams[1].owner;
  PrecoderSolution lifted = noma;
  lifted.layout = rsma_layout;
  auto& streams = lifted.layout.streams;
  streams[0].arrangement = noma.layout.streams[0].arrangement;
  streams[static_cast<std::size_t>(1 + strong)].arrangement = noma.layout.streams[1].arrangement;
  lifted.precoders = CMatrix::Zero(3, noma.precoders.cols());
  lifted.precoders.row(0) = noma.precoders.row(0);
  lifted.precoders.row(1 + strong) = noma.precoders.row(1);
  lifted.precoders.row(1 + weak).setZero();
  lifted.mu = RMatrix::Zero(3, 2);
  lifted.saf_rates = sample_average_rates(samples, lifted.precoders, lifted.layout);
  lifted.saf_sum_rate = sum_rate(lifted.saf_rates, lifted.layout);
  return lifted;
}

PrecoderSolution optimize_strategy(Strategy strategy, const PreparedSampleSet& samples,
                                   const std::vector<PreparedChannel>& nominal, double p_t,
                                   const StrategyOptions& options, const BaselineHints& hints) {
  const int mn = samples.grid.size();
  const int users = samples.num_users();
  const RVector gains = channel_gains(nominal);
  const StreamLayout layout = build_layout(strategy, users, mn, gains);
  PrecoderSolution best = alternating_optimize(samples, nominal, layout, p_t, options.ao);
  if (strategy != Strategy::Rsma || !options.rsma_baseline_starts) return best;

  AoConfig cfg = options.ao;
  cfg.initial_precoders.reset();
  std::optional<PrecoderSolution> sdma;
  const PrecoderSolution* sdma_hint = hints.sdma;
  if (!sdma_hint) {
    sdma = alternating_optimize(samples, nominal, build_layout(Strategy::Sdma, users, mn), p_t, cfg);
    sdma_hint = &*sdma;
  }
  PrecoderSolution lifted = lift_sdma_solution(*sdma_hint, layout, samples);
  if (lifted.saf_sum_rate > best.saf_sum_rate) best = std::move(lifted);

  if (users == 2) {
    std::optional<PrecoderSolution> noma;
    const PrecoderSolution* noma_hint = hints.noma;
    if (!noma_hint) {
      noma = alternating_optimize(samples, nominal, build_layout(Strategy::Noma, users, mn, gains), p_t, cfg);
      noma_hint = &*noma;
    }
    PrecoderSolution from_noma = lift_noma_solution(*noma_hint, layout, samples);
    if (from_noma.saf_sum_rate > best.saf_sum_rate) best = std::move(from_noma);
  }
  return best;
}

}  // namespace otfs_rsma
