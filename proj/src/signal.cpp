// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/signal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace otfs_rsma {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Rsma: return "rsma";
    case Strategy::Sdma: return "sdma";
    case Strategy::Noma: return "noma";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "rsma") return Strategy::Rsma;
  if (lower == "sdma") return Strategy::Sdma;
  if (lower == "noma") return Strategy::Noma;
  throw InvalidParameter("unknown strategy '" + name + "'");
}

bool StreamLayout::decodes(int user, int stream) const {
  const auto& d = streams.at(static_cast<std::size_t>(stream)).decoders;
  return std::find(d.begin(), d.end(), user) != d.end();
}

bool StreamLayout::interferes(int user, int stream, int other) const {
  if (other == stream) return false;
  if (!streams[static_cast<std::size_t>(other)].active) return false;
  return !(other < stream && decodes(user, other));
}

std::vector<int> StreamLayout::residual_streams(int user, int stream) const {
  std::vector<int> out;
  for (int j = 0; j < num_streams(); ++j) {
    if (j == stream ? streams[static_cast<std::size_t>(j)].active : interferes(user, stream, j)) {
      out.push_back(j);
    }
  }
  return out;
}

int StreamLayout::num_singleton_streams() const {
  return static_cast<int>(std::count_if(streams.begin(), streams.end(),
                                        [](const Stream& s) { return !s.shared(); }));
}

void StreamLayout::validate(int mn) const {
  if (num_users < 1) throw ContractViolation("layout needs at least one user");
  if (streams.empty()) throw ContractViolation("layout has no streams");
  for (const auto& s : streams) {
    if (s.decoders.empty()) throw ContractViolation("stream without decoders");
    for (int u : s.decoders) {
      if (u < 0 || u >= num_users) throw ContractViolation("decoder index out of range");
    }
    for (int u : s.beneficiaries) {
      if (std::find(s.decoders.begin(), s.decoders.end(), u) == s.decoders.end()) {
        throw ContractViolation("beneficiary must also decode the stream");
      }
    }
    if (s.beneficiaries.empty()) throw ContractViolation("stream without beneficiaries");
    if (s.arrangement.size() != mn) throw ContractViolation("arrangement length must equal MN");
    for (Eigen::Index k = 0; k < s.arrangement.size(); ++k) {
      if (s.arrangement(k) != 0.0 && s.arrangement(k) != 1.0) {
        throw ContractViolation("arrangement entries must be 0 or 1");
      }
    }
  }
}

CMatrix arrangement_basis(const RVector& psi, const GridConfig& grid) {
  if (psi.size() != grid.size()) throw DimensionError("arrangement length must equal MN");
  return dd_to_td_matrix(grid) * psi.cast<cplx>().asDiagonal();
}

CMatrix effective_precoder(const CVector& p, const RVector& psi, const GridConfig& grid) {
  const CMatrix basis = arrangement_basis(psi, grid);
  const Eigen::Index mn = grid.size();
  CMatrix out(p.size() * mn, mn);
  for (Eigen::Index b = 0; b < p.size(); ++b) out.middleRows(b * mn, mn) = p(b) * basis;
  return out;
}

PreparedChannel prepare_channel(const CMatrix& h_dd, const GridConfig& grid, int n_t,
                                double noise_var) {
  const int mn = grid.size();
  if (h_dd.rows() != mn || h_dd.cols() != static_cast<Eigen::Index>(n_t) * mn) {
    throw DimensionError("prepare_channel: expected an MN x (n_t MN) channel");
  }
  if (!h_dd.allFinite()) throw InvalidParameter("prepare_channel: non-finite channel entries");
  const CMatrix u = dd_to_td_matrix(grid);
  PreparedChannel ch;
  ch.noise_var = noise_var;
  ch.hu.reserve(static_cast<std::size_t>(n_t));
  for (int b = 0; b < n_t; ++b) ch.hu.push_back(h_dd.middleCols(b * mn, mn) * u);
  return ch;
}

PreparedSampleSet prepare_sample_set(const SampleSet& samples) {
  PreparedSampleSet out{samples.grid, samples.n_t, {}};
  out.users.resize(samples.users.size());
  for (std::size_t u = 0; u < samples.users.size(); ++u) {
    for (const auto& h : samples.users[u].realizations) {
      out.users[u].push_back(prepare_channel(h, samples.grid, samples.n_t, samples.users[u].noise_var));
    }
  }
  return out;
}

CMatrix stream_response(const PreparedChannel& ch, const CVector& p, const RVector& psi) {
  if (p.size() != ch.n_t()) throw DimensionError("stream_response: precoder length != n_t");
  const int mn = ch.mn();
  CMatrix w = CMatrix::Zero(mn, mn);
  for (int b = 0; b < ch.n_t(); ++b) w += p(b) * ch.hu[static_cast<std::size_t>(b)];
  return w * psi.cast<cplx>().asDiagonal();
}

std::vector<CMatrix> stream_responses(const PreparedChannel& ch, const CMatrix& precoders,
                                      const StreamLayout& layout) {
  if (precoders.rows() != layout.num_streams() || precoders.cols() != ch.n_t()) {
    throw DimensionError("precoder matrix must be streams x n_t");
  }
  std::vector<CMatrix> out;
  out.reserve(layout.streams.size());
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& s = layout.streams[static_cast<std::size_t>(j)];
    if (!s.active) {
      out.push_back(CMatrix::Zero(ch.mn(), ch.mn()));
    } else {
      out.push_back(stream_response(ch, precoders.row(j).transpose(), s.arrangement));
    }
  }
  return out;
}

double total_power(const CMatrix& precoders) { return precoders.squaredNorm(); }

Covariances covariances_from_responses(const std::vector<CMatrix>& responses,
                                       const StreamLayout& layout, int user, int stream,
                                       double noise_var) {
  const Eigen::Index mn = responses.front().rows();
  Covariances cov;
  cov.K = noise_var * CMatrix::Identity(mn, mn);
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (layout.interferes(user, stream, j)) {
      const CMatrix& w = responses[static_cast<std::size_t>(j)];
      cov.K.noalias() += w * w.adjoint();
    }
  }
  const CMatrix& w = responses[static_cast<std::size_t>(stream)];
  cov.T = cov.K;
  cov.T.noalias() += w * w.adjoint();
  return cov;
}

Covariances received_covariances(const PreparedChannel& ch, const CMatrix& precoders,
                                 const StreamLayout& layout, int user, int stream) {
  return covariances_from_responses(stream_responses(ch, precoders, layout), layout, user, stream,
                                    ch.noise_var);
}

Covariances received_covariances_dense(const CMatrix& h_dd, const std::vector<CMatrix>& p_tilde,
                                       const StreamLayout& layout, int user, int stream,
                                       double noise_var) {
  std::vector<CMatrix> responses;
  responses.reserve(p_tilde.size());
  for (const auto& p : p_tilde) responses.push_back(h_dd * p);
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (!layout.streams[static_cast<std::size_t>(j)].active) responses[static_cast<std::size_t>(j)].setZero();
  }
  return covariances_from_responses(responses, layout, user, stream, noise_var);
}

double log2det_hpd(const CMatrix& m) {
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw SolverError("log2det_hpd: matrix is not positive definite");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m.rows(); ++k) acc += std::log(llt.matrixLLT()(k, k).real());
  return 2.0 * acc / std::log(2.0);
}

double stream_rate_bits(const Covariances& cov) {
  return std::max(0.0, log2det_hpd(cov.T) - log2det_hpd(cov.K));
}

RVector user_stream_rates(const PreparedChannel& ch, const CMatrix& precoders,
                          const StreamLayout& layout, int user) {
  const auto responses = stream_responses(ch, precoders, layout);
  RVector rates = RVector::Zero(layout.num_streams());
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (!layout.decodes(user, j) || !layout.streams[static_cast<std::size_t>(j)].active) continue;
    rates(j) = stream_rate_bits(covariances_from_responses(responses, layout, user, j, ch.noise_var));
  }
  if (!rates.allFinite()) throw SolverError("non-finite rate; check the channel entries");
  return rates;
}

RMatrix instantaneous_rates(const std::vector<PreparedChannel>& user_channels,
                            const CMatrix& precoders, const StreamLayout& layout) {
  if (static_cast<int>(user_channels.size()) != layout.num_users) {
    throw DimensionError("one channel per user expected");
  }
  RMatrix rates(layout.num_streams(), layout.num_users);
  for (int u = 0; u < layout.num_users; ++u) {
    rates.col(u) = user_stream_rates(user_channels[static_cast<std::size_t>(u)], precoders, layout, u);
  }
  return rates;
}

RMatrix sample_average_rates(const PreparedSampleSet& samples, const CMatrix& precoders,
                             const StreamLayout& layout) {
  if (samples.num_samples() < 1) throw InvalidParameter("sample_average_rates: empty sample set");
  if (samples.num_users() != layout.num_users) throw DimensionError("sample set / layout user mismatch");
  RMatrix acc = RMatrix::Zero(layout.num_streams(), layout.num_users);
  for (int u = 0; u < layout.num_users; ++u) {
    for (const auto& ch : samples.users[static_cast<std::size_t>(u)]) {
      acc.col(u) += user_stream_rates(ch, precoders, layout, u);
    }
  }
  return acc / samples.num_samples();
}

RVector stream_capacity(const RMatrix& rates, const StreamLayout& layout) {
  RVector cap(layout.num_streams());
  for (int j = 0; j < layout.num_streams(); ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (int u : layout.streams[static_cast<std::size_t>(j)].decoders) m = std::min(m, rates(j, u));
    cap(j) = m;
  }
  return cap;
}

double sum_rate(const RMatrix& rates, const StreamLayout& layout) {
  return stream_capacity(rates, layout).sum();
}

RVector split_common_rate(const RVector& rates, const std::optional<RVector>& mu, double tol) {
  if (rates.size() == 0) throw InvalidParameter("split_common_rate: no users");
  if ((rates.array() < 0.0).any()) throw InvalidParameter("split_common_rate: negative rate");
  const double cap = rates.minCoeff();
  if (!mu) {
    RVector c = RVector::Zero(rates.size());
    c(0) = cap;
    return c;
  }
  if (mu->size() != rates.size()) throw DimensionError("split_common_rate: mu length mismatch");
  if ((mu->array() > tol).any()) throw ContractViolation("split_common_rate: mu must be <= 0");
  RVector c = (-*mu).cwiseMax(0.0);
  if (c.sum() > cap + tol) throw ContractViolation("common split exceeds the common rate");
  return c;
}

RateReport make_rate_report(const RMatrix& rates_bits, const StreamLayout& layout, int mn,
                            const std::optional<RMatrix>& split) {
  if (rates_bits.rows() != layout.num_streams() || rates_bits.cols() != layout.num_users) {
    throw DimensionError("rate matrix must be streams x users");
  }
  RateReport r;
  r.stream_rates = rates_bits / mn;
  r.allocation = RMatrix::Zero(layout.num_streams(), layout.num_users);
  const RVector cap = stream_capacity(rates_bits, layout);
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& s = layout.streams[static_cast<std::size_t>(j)];
    if (s.beneficiaries.size() == 1) {
      r.allocation(j, s.beneficiaries.front()) = cap(j);
      continue;
    }
    RVector cap_vec = RVector::Constant(static_cast<Eigen::Index>(s.beneficiaries.size()), cap(j));
    std::optional<RVector> mu;
    if (split && split->row(j).cwiseAbs().sum() > 0.0) {
      RVector m(static_cast<Eigen::Index>(s.beneficiaries.size()));
      for (std::size_t b = 0; b < s.beneficiaries.size(); ++b) m(static_cast<Eigen::Index>(b)) = -(*split)(j, s.beneficiaries[b]);
      mu = m;
    }
    const RVector c = split_common_rate(cap_vec, mu, 1e-6 * std::max(1.0, cap(j)));
    for (std::size_t b = 0; b < s.beneficiaries.size(); ++b) {
      r.allocation(j, s.beneficiaries[b]) = c(static_cast<Eigen::Index>(b));
    }
  }
  r.allocation /= mn;
  r.user_totals = r.allocation.colwise().sum().transpose();
  r.sum_rate = r.user_totals.sum();
  return r;
}

RVector RateReport::common_rates(const StreamLayout& layout) const {
  RVector out = RVector::Zero(layout.num_users);
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (layout.streams[static_cast<std::size_t>(j)].kind != StreamKind::Common) continue;
    for (int u : layout.streams[static_cast<std::size_t>(j)].decoders) out(u) += stream_rates(j, u);
  }
  return out;
}

RVector RateReport::private_rates(const StreamLayout& layout) const {
  RVector out = RVector::Zero(layout.num_users);
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& s = layout.streams[static_cast<std::size_t>(j)];
    if (s.kind == StreamKind::Private) out(s.owner) += stream_rates(j, s.owner);
  }
  return out;
}

}  // namespace otfs_rsma
