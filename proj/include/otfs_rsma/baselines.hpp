// SPDX-License-Identifier: Apache-2.0
//
// RSMA, SDMA and NOMA as StreamLayout instances, and a strategy-level
// entry point over the shared optimizer.

#pragma once

#include <vector>

#include "otfs_rsma/optimizer.hpp"
#include "otfs_rsma/signal.hpp"

namespace otfs_rsma {

/// Frobenius norm of each user's nominal effective channel.
RVector channel_gains(const std::vector<CMatrix>& nominal_dd);
RVector channel_gains(const std::vector<PreparedChannel>& nominal);

/// Users sorted by ascending gain, ties broken by the lower index.
std::vector<int> gain_order(const RVector& gains);

/// RSMA: one common stream decoded by all, then I private streams.
/// SDMA: I private streams. NOMA: I layers in ascending-gain order; layer k
/// belongs to the k-th weakest user and is decoded by it and every stronger
/// user. All arrangements are all-ones. `gains` is needed for NOMA only.
StreamLayout build_layout(Strategy strategy, int num_users, int mn, const RVector& gains = {});

/// Two-user RSMA restricted to NOMA: the weaker user's private stream is
/// disabled and the common stream is credited to the weaker user only.
StreamLayout noma_as_rsma_layout(int mn, const RVector& gains);

struct StrategyOptions {
  AoConfig ao;
  /// For RSMA, also solve SDMA (and NOMA when I = 2), embed them in the RSMA
  /// layout and keep whichever point has the highest SAF sum rate.
  bool rsma_baseline_starts = true;
};

/// Embeds an SDMA solution into an RSMA layout with the common stream off.
PrecoderSolution lift_sdma_solution(const PrecoderSolution& sdma, const StreamLayout& rsma_layout,
                                    const PreparedSampleSet& samples);

/// Embeds a two-user NOMA solution into an RSMA layout: the weak user's
/// layer becomes the common stream and the weak user's private stream is off.
PrecoderSolution lift_noma_solution(const PrecoderSolution& noma, const StreamLayout& rsma_layout,
                                    const PreparedSampleSet& samples);

/// Baseline solutions on the same samples and power, reused by RSMA instead
/// of optimizing them again.
struct BaselineHints {
  const PrecoderSolution* sdma = nullptr;
  const PrecoderSolution* noma = nullptr;
};

PrecoderSolution optimize_strategy(Strategy strategy, const PreparedSampleSet& samples,
                                   const std::vector<PreparedChannel>& nominal, double p_t,
                                   const StrategyOptions& options = {}, const BaselineHints& hints = {});

}  // namespace otfs_rsma
