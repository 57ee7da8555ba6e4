// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace otfs_rsma {

namespace {

const double kLn2 = std::log(2.0);
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlackTol = 1e-9;

double phi_value(const SafForms& forms, const StreamLayout& layout, const CMatrix& precoders,
                 int stream, std::size_t k) {
  const int user = layout.streams[static_cast<std::size_t>(stream)].decoders[k];
  return form_awmse(forms.forms[static_cast<std::size_t>(stream)][k], precoders, layout, user, stream);
}

double phi_constant(const QuadraticForm& f) {
  return f.mn + (f.trace_const - f.mn - f.logdet_b) / kLn2;
}

RMatrix split_mu(const StreamLayout& layout, const RVector& slacks) {
  RMatrix mu = RMatrix::Zero(layout.num_streams(), layout.num_users);
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& s = layout.streams[static_cast<std::size_t>(j)];
    if (!s.shared()) continue;
    const double share = std::min(slacks(j), 0.0) / static_cast<double>(s.beneficiaries.size());
    for (int b : s.beneficiaries) mu(j, b) = share;
  }
  return mu;
}

CMatrix project_power(CMatrix p, double p_t) {
  const double pw = total_power(p);
  if (pw > p_t && pw > 0.0) p *= std::sqrt(p_t / pw);
  return p;
}

}  // namespace

ArrangementMode parse_arrangement_mode(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "fixed") return ArrangementMode::Fixed;
  if (lower == "greedy" || lower == "greedy-flip") return ArrangementMode::GreedyFlip;
  if (lower == "exhaustive") return ArrangementMode::Exhaustive;
  throw InvalidParameter("unknown arrangement mode '" + name + "'");
}

std::string to_string(ArrangementMode m) {
  switch (m) {
    case ArrangementMode::Fixed: return "fixed";
    case ArrangementMode::GreedyFlip: return "greedy-flip";
    case ArrangementMode::Exhaustive: return "exhaustive";
  }
  return "unknown";
}

RVector p4_slacks(const SafForms& forms, const StreamLayout& layout, const CMatrix& precoders) {
  RVector s = RVector::Zero(layout.num_streams());
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& st = layout.streams[static_cast<std::size_t>(j)];
    if (!st.shared()) continue;
    double worst = -kInf;
    for (std::size_t k = 0; k < st.decoders.size(); ++k) {
      worst = std::max(worst, phi_value(forms, layout, precoders, j, k));
    }
    s(j) = worst - forms.forms[static_cast<std::size_t>(j)].front().mn;
  }
  return s;
}

double p4_objective(const SafForms& forms, const StreamLayout& layout, const CMatrix& precoders) {
  const RVector s = p4_slacks(forms, layout, precoders);
  double t = 0.0;
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& st = layout.streams[static_cast<std::size_t>(j)];
    if (st.shared()) {
      const double tol = kSlackTol * std::max(1.0, static_cast<double>(forms.forms[static_cast<std::size_t>(j)].front().mn));
      if (s(j) > tol) return kInf;
      t += std::min(s(j), 0.0);
    } else {
      t += phi_value(forms, layout, precoders, j, 0);
    }
  }
  return t;
}

PrecoderUpdate precoder_update(const SafForms& forms, const StreamLayout& layout, double p_t,
                               const CMatrix& previous, const QcqpOptions& options) {
  if (!(p_t >= 0.0)) throw InvalidParameter("power budget must be >= 0");
  const int num_streams = layout.num_streams();
  if (static_cast<int>(forms.forms.size()) != num_streams) throw DimensionError("forms / layout mismatch");
  const int n_t = static_cast<int>(previous.cols());
  const int mn = forms.forms.front().front().mn;

  PrecoderUpdate out;
  const CMatrix prev = project_power(previous, p_t);
  const double t_prev = p4_objective(forms, layout, prev);

  if (p_t == 0.0) {
    out.precoders = CMatrix::Zero(num_streams, n_t);
    out.t = p4_objective(forms, layout, out.precoders);
    if (!std::isfinite(out.t)) throw SolverError("precoder program is infeasible at zero power");
    out.mu = split_mu(layout, p4_slacks(forms, layout, out.precoders));
    return out;
  }

  // which precoders enter any non-constant term
  std::vector<char> used(static_cast<std::size_t>(num_streams), 0);
  for (int j = 0; j < num_streams; ++j) {
    const auto& st = layout.streams[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < st.decoders.size(); ++k) {
      if (forms.forms[j][k].is_zero()) continue;
      for (int r : layout.residual_streams(st.decoders[k], j)) used[static_cast<std::size_t>(r)] = 1;
    }
  }
  std::vector<int> block(static_cast<std::size_t>(num_streams), -1);
  int dim = 0;
  for (int j = 0; j < num_streams; ++j) {
    if (used[j] && layout.streams[static_cast<std::size_t>(j)].active) {
      block[j] = dim;
      dim += 2 * n_t;
    }
  }
  const int power_dim = dim;

  // shared-stream slacks: free variable, or pinned at zero when a constant
  // constraint leaves no interior
  std::vector<int> slack(static_cast<std::size_t>(num_streams), -1);
  std::vector<double> slack_lb(static_cast<std::size_t>(num_streams), -kInf);
  for (int j = 0; j < num_streams; ++j) {
    const auto& st = layout.streams[static_cast<std::size_t>(j)];
    if (!st.shared()) continue;
    bool any_free = false;
    for (std::size_t k = 0; k < st.decoders.size(); ++k) {
      const auto& f = forms.forms[j][k];
      if (f.is_zero()) {
        slack_lb[j] = std::max(slack_lb[j], phi_constant(f) - mn);
      } else {
        any_free = true;
      }
    }
    if (slack_lb[j] > kSlackTol * mn) throw SolverError("precoder program is infeasible: constant rate constraint");
    if (any_free && slack_lb[j] < -kSlackTol * mn) slack[j] = dim++;
  }
  if (dim == 0) {
    out.precoders = CMatrix::Zero(num_streams, n_t);
    out.t = p4_objective(forms, layout, out.precoders);
    out.mu = split_mu(layout, p4_slacks(forms, layout, out.precoders));
    return out;
  }

  auto phi_function = [&](int j, std::size_t k) {
    const auto& f = forms.forms[j][k];
    const int user = layout.streams[static_cast<std::size_t>(j)].decoders[k];
    QuadraticFunction q;
    q.hessian = RMatrix::Zero(dim, dim);
    q.gradient = RVector::Zero(dim);
    q.constant = phi_constant(f);
    for (int r : layout.residual_streams(user, j)) {
      const int o = block[r];
      if (o < 0) continue;
      const auto& psi = layout.streams[static_cast<std::size_t>(r)].arrangement;
      const CMatrix qc = f.reduced_quadratic(psi) / kLn2;
      RMatrix real(2 * n_t, 2 * n_t);
      real << qc.real(), -qc.imag(), qc.imag(), qc.real();
      q.hessian.block(o, o, 2 * n_t, 2 * n_t) += 2.0 * real;
      if (r == j) {
        const CVector v = f.reduced_linear(psi) / kLn2;
        q.gradient.segment(o, n_t) -= 2.0 * v.real();
        q.gradient.segment(o + n_t, n_t) -= 2.0 * v.imag();
      }
    }
    return q;
  };

  QcqpProblem prob;
  prob.dim = dim;
  prob.objective.hessian = RMatrix::Zero(dim, dim);
  prob.objective.gradient = RVector::Zero(dim);
  for (int j = 0; j < num_streams; ++j) {
    const auto& st = layout.streams[static_cast<std::size_t>(j)];
    if (st.shared()) {
      if (slack[j] >= 0) {
        prob.objective.gradient(slack[j]) += 1.0;
        RVector e = RVector::Zero(dim);
        e(slack[j]) = 1.0;
        prob.constraints.push_back(QuadraticFunction::linear(e, 0.0));
        if (std::isfinite(slack_lb[j])) prob.constraints.push_back(QuadraticFunction::linear(-e, slack_lb[j]));
      }
      for (std::size_t k = 0; k < st.decoders.size(); ++k) {
        if (forms.forms[j][k].is_zero()) continue;
        QuadraticFunction c = phi_function(j, k);
        c.constant -= mn;
        if (slack[j] >= 0) c.gradient(slack[j]) -= 1.0;
        prob.constraints.push_back(std::move(c));
      }
    } else {
      const QuadraticFunction f = phi_function(j, 0);
      prob.objective.hessian += f.hessian;
      prob.objective.gradient += f.gradient;
      prob.objective.constant += f.constant;
    }
  }
  {
    QuadraticFunction pw;
    pw.hessian = RMatrix::Zero(dim, dim);
    pw.hessian.topLeftCorner(power_dim, power_dim) = 2.0 * RMatrix::Identity(power_dim, power_dim);
    pw.gradient = RVector::Zero(dim);
    pw.constant = -p_t;
    prob.constraints.push_back(std::move(pw));
  }

  auto unpack = [&](const RVector& x) {
    CMatrix p = CMatrix::Zero(num_streams, n_t);
    for (int j = 0; j < num_streams; ++j) {
      if (block[j] < 0) continue;
      for (int a = 0; a < n_t; ++a) p(j, a) = cplx(x(block[j] + a), x(block[j] + n_t + a));
    }
    return p;
  };

  RVector x0 = RVector::Zero(dim);
  {
    CMatrix start = CMatrix::Zero(num_streams, n_t);
    for (int j = 0; j < num_streams; ++j) {
      if (block[j] >= 0) start.row(j) = prev.row(j);
    }
    const double pw = total_power(start);
    if (pw > 0.999 * p_t) start *= std::sqrt(0.999 * p_t / pw);
    for (int j = 0; j < num_streams; ++j) {
      if (block[j] < 0) continue;
      for (int a = 0; a < n_t; ++a) {
        x0(block[j] + a) = start(j, a).real();
        x0(block[j] + n_t + a) = start(j, a).imag();
      }
    }
    const RVector s0 = p4_slacks(forms, layout, start);
    for (int j = 0; j < num_streams; ++j) {
      if (slack[j] < 0) continue;
      const double lo = std::max(s0(j), slack_lb[j]);
      x0(slack[j]) = lo < 0.0 ? 0.5 * lo : -1e-6;
    }
  }

  CMatrix candidate;
  try {
    const QcqpResult res = qcqp_solve(prob, options, x0);
    out.status = res.status;
    out.kkt_stationarity = res.kkt_stationarity;
    out.kkt_complementarity = res.kkt_complementarity;
    out.max_violation = res.max_violation;
    candidate = project_power(unpack(res.x), p_t);
  } catch (const SolverError&) {
    if (!std::isfinite(t_prev)) throw;
    out.status = QcqpStatus::Degraded;
  }

  const double t_new = candidate.size() ? p4_objective(forms, layout, candidate) : kInf;
  if (t_new <= t_prev) {
    out.precoders = candidate;
    out.t = t_new;
  } else {
    if (!std::isfinite(t_prev)) throw SolverError("precoder program returned an infeasible point");
    out.precoders = prev;
    out.t = t_prev;
    out.solver_point = false;
  }
  out.mu = split_mu(layout, p4_slacks(forms, layout, out.precoders));
  return out;
}

StreamLayout arrangement_update(const SafForms& forms, const StreamLayout& layout,
                                const CMatrix& precoders, ArrangementMode mode, double& t) {
  StreamLayout best = layout;
  t = p4_objective(forms, best, precoders);
  if (mode == ArrangementMode::Fixed) return best;

  std::vector<int> streams;
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (layout.streams[static_cast<std::size_t>(j)].active) streams.push_back(j);
  }
  const int mn = static_cast<int>(layout.streams.front().arrangement.size());

  if (mode == ArrangementMode::Exhaustive) {
    const long bits = static_cast<long>(streams.size()) * mn;
    if (bits > 12) {
      throw InvalidParameter("exhaustive arrangement search is limited to 12 binary entries, got " +
                             std::to_string(bits));
    }
    StreamLayout trial = layout;
    for (long mask = 0; mask < (1L << bits); ++mask) {
      for (std::size_t s = 0; s < streams.size(); ++s) {
        auto& psi = trial.streams[static_cast<std::size_t>(streams[s])].arrangement;
        for (int k = 0; k < mn; ++k) psi(k) = (mask >> (static_cast<long>(s) * mn + k)) & 1L ? 1.0 : 0.0;
      }
      const double v = p4_objective(forms, trial, precoders);
      if (v < t) {
        t = v;
        best = trial;
      }
    }
    return best;
  }

  bool improved = true;
  while (improved) {
    improved = false;
    for (int j : streams) {
      for (int k = 0; k < mn; ++k) {
        auto& psi = best.streams[static_cast<std::size_t>(j)].arrangement;
        psi(k) = 1.0 - psi(k);
        const double v = p4_objective(forms, best, precoders);
        if (v < t - 1e-12 * std::max(1.0, std::abs(t))) {
          t = v;
          improved = true;
        } else {
          psi(k) = 1.0 - psi(k);
        }
      }
    }
  }
  return best;
}

CMatrix initial_precoders(const std::vector<PreparedChannel>& nominal, const StreamLayout& layout,
                          double p_t, double common_fraction) {
  if (static_cast<int>(nominal.size()) != layout.num_users) throw DimensionError("one nominal channel per user expected");
  if (!(common_fraction >= 0.0 && common_fraction <= 1.0)) throw InvalidParameter("common power fraction must lie in [0, 1]");
  const int n_t = nominal.front().n_t();
  std::vector<CMatrix> gram;
  CMatrix total = CMatrix::Zero(n_t, n_t);
  for (const auto& ch : nominal) {
    CMatrix g(n_t, n_t);
    for (int a = 0; a < n_t; ++a) {
      for (int b = 0; b < n_t; ++b) g(a, b) = ch.hu[a].conjugate().cwiseProduct(ch.hu[b]).sum();
    }
    total += g;
    gram.push_back(std::move(g));
  }
  auto dominant = [](const CMatrix& g) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (g + g.adjoint()));
    return CVector(es.eigenvectors().col(g.cols() - 1));
  };

  int num_common = 0;
  int num_other = 0;
  for (const auto& s : layout.streams) {
    if (!s.active) continue;
    (s.kind == StreamKind::Common ? num_common : num_other)++;
  }
  double common_power = 0.0;
  double other_power = 0.0;
  if (num_common > 0 && num_other > 0) {
    common_power = common_fraction * p_t / num_common;
    other_power = (1.0 - common_fraction) * p_t / num_other;
  } else if (num_common > 0) {
    common_power = p_t / num_common;
  } else if (num_other > 0) {
    other_power = p_t / num_other;
  }

  CMatrix p = CMatrix::Zero(layout.num_streams(), n_t);
  for (int j = 0; j < layout.num_streams(); ++j) {
    const auto& s = layout.streams[static_cast<std::size_t>(j)];
    if (!s.active) continue;
    if (s.kind == StreamKind::Common) {
      p.row(j) = std::sqrt(common_power) * dominant(total).transpose();
    } else {
      p.row(j) = std::sqrt(other_power) * dominant(gram[static_cast<std::size_t>(s.owner)]).transpose();
    }
  }
  return p;
}

std::vector<double> PrecoderSolution::objective_trace() const {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& e : trace) out.push_back(e.t);
  return out;
}

RVector PrecoderSolution::common_split() const {
  for (int j = 0; j < layout.num_streams(); ++j) {
    if (layout.streams[static_cast<std::size_t>(j)].kind == StreamKind::Common) return -mu.row(j).transpose();
  }
  return RVector::Zero(layout.num_users);
}

namespace {

TraceEntry make_entry(int k, double t, const CMatrix& p) {
  TraceEntry e;
  e.iteration = k;
  e.t = t;
  e.power = total_power(p);
  e.stream_norms = p.rowwise().norm();
  return e;
}

}  // namespace

PrecoderSolution alternating_optimize(const PreparedSampleSet& samples,
                                      const std::vector<PreparedChannel>& nominal,
                                      const StreamLayout& layout, double p_t, const AoConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw InvalidParameter("AO epsilon must be > 0");
  if (cfg.max_iters < 1) throw InvalidParameter("AO max_iters must be >= 1");
  if (!(p_t >= 0.0)) throw InvalidParameter("power budget must be >= 0");
  layout.validate(samples.grid.size());

  PrecoderSolution sol;
  sol.layout = layout;
  CMatrix p;
  if (cfg.initial_precoders) {
    p = *cfg.initial_precoders;
    if (p.rows() != layout.num_streams() || p.cols() != samples.n_t) {
      throw DimensionError("initial precoders must be streams x n_t");
    }
    if (total_power(p) > p_t * (1.0 + 1e-9) + 1e-12) throw InvalidParameter("initial precoders exceed the power budget");
    for (int j = 0; j < layout.num_streams(); ++j) {
      if (!layout.streams[static_cast<std::size_t>(j)].active) p.row(j).setZero();
    }
  } else {
    p = initial_precoders(nominal, layout, p_t, cfg.common_power_fraction);
  }

  int k = 0;
  try {
    SafForms forms = compute_saf_forms(samples, p, sol.layout);
    double t_prev = p4_objective(forms, sol.layout, p);
    if (!std::isfinite(t_prev)) throw SolverError("initial point is infeasible");
    sol.mu = split_mu(sol.layout, p4_slacks(forms, sol.layout, p));
    sol.trace.push_back(make_entry(0, t_prev, p));
    for (k = 1; k <= cfg.max_iters; ++k) {
      if (k > 1) forms = compute_saf_forms(samples, p, sol.layout);
      PrecoderUpdate upd = precoder_update(forms, sol.layout, p_t, p, cfg.qcqp);
      if (upd.status == QcqpStatus::Degraded) ++sol.degraded_steps;
      p = upd.precoders;
      sol.mu = upd.mu;
      double t = upd.t;
      if (cfg.arrangement != ArrangementMode::Fixed) {
        sol.layout = arrangement_update(forms, sol.layout, p, cfg.arrangement, t);
        sol.mu = split_mu(sol.layout, p4_slacks(forms, sol.layout, p));
      }
      sol.trace.push_back(make_entry(k, t, p));
      sol.iterations = k;
      if (std::abs(t - t_prev) < cfg.epsilon) {
        sol.converged = true;
        break;
      }
      t_prev = t;
    }
  } catch (const SolverError& e) {
    throw SolverError("AO iteration " + std::to_string(k) + ": " + e.what());
  }

  sol.precoders = p;
  sol.saf_rates = sample_average_rates(samples, p, sol.layout);
  sol.saf_sum_rate = sum_rate(sol.saf_rates, sol.layout);
  return sol;
}

void write_trace_csv(const std::filesystem::path& file, const PrecoderSolution& sol) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  os << "iteration,t,power";
  for (int j = 0; j < sol.layout.num_streams(); ++j) os << ",norm_" << j;
  os << '\n' << std::setprecision(17);
  for (const auto& e : sol.trace) {
    os << e.iteration << ',' << e.t << ',' << e.power;
    for (Eigen::Index j = 0; j < e.stream_norms.size(); ++j) os << ',' << e.stream_norms(j);
    os << '\n';
  }
}

}  // namespace otfs_rsma
