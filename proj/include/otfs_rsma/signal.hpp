// SPDX-License-Identifier: Apache-2.0
//
// Stream structure and link-level rates. A StreamLayout describes every
// multiple-access scheme in one vocabulary: streams with decoding sets,
// a successive-decoding order and a binary DD arrangement each.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "otfs_rsma/channel.hpp"
#include "otfs_rsma/transforms.hpp"
#include "otfs_rsma/types.hpp"

namespace otfs_rsma {

enum class Strategy { Rsma, Sdma, Noma };
enum class StreamKind { Common, Private, Layered };

std::string to_string(Strategy s);
/// Accepts "rsma", "sdma", "noma" (case-insensitive).
Strategy parse_strategy(const std::string& name);

struct Stream {
  StreamKind kind = StreamKind::Private;
  int owner = -1;                  // -1 for a common stream
  std::vector<int> decoders;       // users that must decode this stream
  std::vector<int> beneficiaries;  // users credited with its rate
  RVector arrangement;             // diagonal of Psi, entries 0 or 1
  bool active = true;              // inactive streams carry no power

  bool shared() const { return decoders.size() > 1; }
};

/// Streams are listed in successive-decoding order: a receiver removes
/// every earlier stream it decodes before decoding a later one.
struct StreamLayout {
  Strategy strategy = Strategy::Sdma;
  int num_users = 0;
  std::vector<Stream> streams;

  int num_streams() const { return static_cast<int>(streams.size()); }
  bool decodes(int user, int stream) const;
  /// True when `other` is still present while `user` decodes `stream`.
  bool interferes(int user, int stream, int other) const;
  /// Streams whose signal remains when `user` decodes `stream`, itself included.
  std::vector<int> residual_streams(int user, int stream) const;
  int num_singleton_streams() const;

  /// Throws ContractViolation on malformed layouts.
  void validate(int mn) const;
};

/// Psi~ = (F_N^H kron I_M) diag(psi). Dense; reference path and tests.
CMatrix arrangement_basis(const RVector& psi, const GridConfig& grid);

/// P~ = p kron Psi~, an (n_t MN) x MN matrix.
CMatrix effective_precoder(const CVector& p, const RVector& psi, const GridConfig& grid);

/// Effective DD channel with the DD-to-TD map folded into each antenna
/// block: hu[b] = H~_b (F_N^H kron I_M), so H~ P~ = sum_b p_b hu[b] diag(psi).
struct PreparedChannel {
  std::vector<CMatrix> hu;
  double noise_var = 1.0;

  int n_t() const { return static_cast<int>(hu.size()); }
  int mn() const { return hu.empty() ? 0 : static_cast<int>(hu.front().rows()); }
};

PreparedChannel prepare_channel(const CMatrix& h_dd, const GridConfig& grid, int n_t,
                                double noise_var = 1.0);

/// users[u][l] is user u's prepared channel on sample l.
struct PreparedSampleSet {
  GridConfig grid;
  int n_t = 0;
  std::vector<std::vector<PreparedChannel>> users;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_samples() const { return users.empty() ? 0 : static_cast<int>(users.front().size()); }
};

PreparedSampleSet prepare_sample_set(const SampleSet& samples);

/// H~ P~_j for one stream, MN x MN.
CMatrix stream_response(const PreparedChannel& ch, const CVector& p, const RVector& psi);

/// H~ P~_j for every stream of the layout (zero for inactive streams).
/// Precoders are the rows of `precoders`.
std::vector<CMatrix> stream_responses(const PreparedChannel& ch, const CMatrix& precoders,
                                      const StreamLayout& layout);

double total_power(const CMatrix& precoders);

struct Covariances {
  CMatrix T;  // received covariance with the stream present
  CMatrix K;  // interference plus noise
};

Covariances covariances_from_responses(const std::vector<CMatrix>& responses,
                                       const StreamLayout& layout, int user, int stream,
                                       double noise_var);

Covariances received_covariances(const PreparedChannel& ch, const CMatrix& precoders,
                                 const StreamLayout& layout, int user, int stream);

/// Dense reference: builds T and K from the explicit H~ and P~_j.
Covariances received_covariances_dense(const CMatrix& h_dd, const std::vector<CMatrix>& p_tilde,
                                       const StreamLayout& layout, int user, int stream,
                                       double noise_var);

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
double log2det_hpd(const CMatrix& m);

/// log2 det(T) - log2 det(K), bits per frame.
double stream_rate_bits(const Covariances& cov);

/// Unnormalized rates (bits/frame) of every stream `user` decodes;
/// entries for streams the user does not decode are zero.
RVector user_stream_rates(const PreparedChannel& ch, const CMatrix& precoders,
                          const StreamLayout& layout, int user);

/// streams x users matrix of instantaneous unnormalized rates.
RMatrix instantaneous_rates(const std::vector<PreparedChannel>& user_channels,
                            const CMatrix& precoders, const StreamLayout& layout);

/// Arithmetic mean over samples of instantaneous_rates.
RMatrix sample_average_rates(const PreparedSampleSet& samples, const CMatrix& precoders,
                             const StreamLayout& layout);

/// Rate each stream can carry: the decoder's rate for singleton streams,
/// the minimum over decoders for shared ones.
RVector stream_capacity(const RMatrix& rates, const StreamLayout& layout);

/// Sum of stream_capacity.
double sum_rate(const RMatrix& rates, const StreamLayout& layout);

/// Split of a shared stream's rate. With `mu` the split is -mu and must
/// satisfy sum <= min(rates) + tol; otherwise the whole minimum goes to
/// the first user.
RVector split_common_rate(const RVector& rates, const std::optional<RVector>& mu = std::nullopt,
                          double tol = 1e-6);

struct RateReport {
  RMatrix stream_rates;  // streams x users, normalized by MN
  RMatrix allocation;    // streams x users, rate credited to each user
  RVector user_totals;   // per-user normalized total rate
  double sum_rate = 0.0;

  /// Per-user common/private view for RSMA and SDMA layouts.
  RVector common_rates(const StreamLayout& layout) const;
  RVector private_rates(const StreamLayout& layout) const;
};

/// Builds the report from unnormalized rates. `split` (streams x users) gives
/// the shares of shared streams, typically -mu from the optimizer; shared
/// rows left empty fall back to split_common_rate's default policy.
RateReport make_rate_report(const RMatrix& rates_bits, const StreamLayout& layout, int mn,
                            const std::optional<RMatrix>& split = std::nullopt);

}  // namespace otfs_rsma
