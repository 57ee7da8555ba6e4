// SPDX-License-Identifier: Apache-2.0

#include "otfs_rsma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "otfs_rsma/rng.hpp"

namespace otfs_rsma {

std::string to_string(ExperimentMode m) {
  return m == ExperimentMode::Standard ? "standard" : "mismatch";
}

ExperimentMode parse_mode(const std::string& name) {
  if (name == "standard") return ExperimentMode::Standard;
  if (name == "mismatch") return ExperimentMode::Mismatch;
  throw ConfigError("unknown mode '" + name + "' (expected standard or mismatch)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

template <typename T>
Field int_field(std::string section, std::string key, T ExperimentConfig::*member) {
  const std::string full = section + "." + key;
  return {section, key,
          [member, full](ExperimentConfig& c, const std::string& v) { c.*member = parse_integer<T>(full, v); },
          [member](const ExperimentConfig& c) -> std::optional<std::string> { return std::to_string(c.*member); }};
}

Field double_field(std::string section, std::string key, double ExperimentConfig::*member) {
  const std::string full = section + "." + key;
  return {section, key,
          [member, full](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(full, v); },
          [member](const ExperimentConfig& c) -> std::optional<std::string> { return format_double(c.*member); }};
}

Field bool_field(std::string section, std::string key, bool ExperimentConfig::*member) {
  const std::string full = section + "." + key;
  return {section, key,
          [member, full](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(full, v); },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::string(c.*member ? "true" : "false");
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    using C = ExperimentConfig;
    std::vector<Field> f;
    f.push_back(int_field("grid", "M", &C::M));
    f.push_back(int_field("grid", "N", &C::N));
    f.push_back(double_field("grid", "delta_f", &C::delta_f));
    f.push_back(int_field("system", "n_t", &C::n_t));
    f.push_back(int_field("system", "users", &C::users));
    f.push_back(double_field("system", "noise_var", &C::noise_var));
    f.push_back(double_field("channel", "rician_factor_db", &C::rician_factor_db));
    f.push_back(int_field("channel", "num_nlos", &C::num_nlos));
    f.push_back(double_field("channel", "nlos_variance", &C::nlos_variance));
    f.push_back(double_field("channel", "max_delay_slots", &C::max_delay_slots));
    f.push_back(double_field("channel", "satellite_velocity", &C::satellite_velocity));
    f.push_back(double_field("channel", "carrier_frequency", &C::carrier_frequency));
    f.push_back(double_field("csit", "rho", &C::rho));
    f.push_back(double_field("csit", "pilot_snr", &C::pilot_snr));
    f.push_back({"csit", "error_variance",
                 [](C& c, const std::string& v) { c.error_variance = parse_double("csit.error_variance", v); },
                 [](const C& c) -> std::optional<std::string> {
                   if (!c.error_variance) return std::nullopt;
                   return format_double(*c.error_variance);
                 }});
    f.push_back(int_field("csit", "samples", &C::samples));
    f.push_back({"csit", "eval_samples",
                 [](C& c, const std::string& v) { c.eval_samples = parse_integer<int>("csit.eval_samples", v); },
                 [](const C& c) -> std::optional<std::string> {
                   if (!c.eval_samples) return std::nullopt;
                   return std::to_string(*c.eval_samples);
                 }});
    f.push_back({"experiment", "strategies",
                 [](C& c, const std::string& v) {
                   c.strategies.clear();
                   for (const auto& s : split_list(v)) {
                     try {
                       c.strategies.push_back(parse_strategy(s));
                     } catch (const InvalidParameter& e) {
                       throw ConfigError("key 'experiment.strategies': " + std::string(e.what()));
                     }
                   }
                 },
                 [](const C& c) -> std::optional<std::string> {
                   std::string out;
                   for (std::size_t i = 0; i < c.strategies.size(); ++i) {
                     out += (i ? "," : "") + to_string(c.strategies[i]);
                   }
                   return out;
                 }});
    f.push_back({"experiment", "pt_db",
                 [](C& c, const std::string& v) {
                   c.pt_db.clear();
                   for (const auto& s : split_list(v)) c.pt_db.push_back(parse_double("experiment.pt_db", s));
                 },
                 [](const C& c) -> std::optional<std::string> {
                   std::string out;
                   for (std::size_t i = 0; i < c.pt_db.size(); ++i) out += (i ? "," : "") + format_double(c.pt_db[i]);
                   return out;
                 }});
    f.push_back(int_field("experiment", "draws", &C::draws));
    f.push_back(int_field("experiment", "master_seed", &C::master_seed));
    f.push_back({"experiment", "mode", [](C& c, const std::string& v) { c.mode = parse_mode(v); },
                 [](const C& c) -> std::optional<std::string> { return to_string(c.mode); }});
    f.push_back({"experiment", "output", [](C& c, const std::string& v) { c.output = v; },
                 [](const C& c) -> std::optional<std::string> { return c.output; }});
    f.push_back(bool_field("experiment", "dump_channels", &C::dump_channels));
    f.push_back(bool_field("experiment", "dump_traces", &C::dump_traces));
    f.push_back(double_field("optimizer", "epsilon", &C::epsilon));
    f.push_back(int_field("optimizer", "max_iters", &C::max_iters));
    f.push_back({"optimizer", "arrangement",
                 [](C& c, const std::string& v) {
                   try {
                     c.arrangement = parse_arrangement_mode(v);
                   } catch (const InvalidParameter& e) {
                     throw ConfigError("key 'optimizer.arrangement': " + std::string(e.what()));
                   }
                 },
                 [](const C& c) -> std::optional<std::string> { return to_string(c.arrangement); }});
    f.push_back(double_field("optimizer", "common_power_fraction", &C::common_power_fraction));
    f.push_back(double_field("optimizer", "qcqp_tol_gap", &C::qcqp_tol_gap));
    f.push_back(double_field("optimizer", "qcqp_tol_feas", &C::qcqp_tol_feas));
    f.push_back(int_field("optimizer", "qcqp_max_newton", &C::qcqp_max_newton));
    f.push_back(bool_field("optimizer", "rsma_baseline_starts", &C::rsma_baseline_starts));
    return f;
  }();
  return fields;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> sections;
  for (const auto& f : schema()) sections.insert(f.section);
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    const auto it = std::find_if(schema().begin(), schema().end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == schema().end()) throw ConfigError(where + "unknown key '" + full + "'");
    if (!seen.insert(full).second) throw ConfigError(where + "duplicate key '" + full + "'");
    if (value.empty()) throw ConfigError(where + "empty value for '" + full + "'");
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : schema()) {
    const auto v = f.get(*this);
    if (!v) continue;
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << *v << '\n';
  }
  return os.str();
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(M >= 1 && N >= 1, "grid.M and grid.N must be >= 1");
  require(delta_f > 0.0, "grid.delta_f must be > 0");
  require(n_t >= 1, "system.n_t must be >= 1");
  require(users >= 1, "system.users must be >= 1");
  require(noise_var > 0.0, "system.noise_var must be > 0");
  require(num_nlos >= 0, "channel.num_nlos must be >= 0");
  require(error_variance.has_value() || num_nlos >= 1,
          "channel.num_nlos must be >= 1 unless csit.error_variance is given");
  require(nlos_variance >= 0.0, "channel.nlos_variance must be >= 0");
  require(max_delay_slots > 0.0 && max_delay_slots <= 1.0, "channel.max_delay_slots must lie in (0, 1]");
  require(satellite_velocity >= 0.0, "channel.satellite_velocity must be >= 0");
  require(carrier_frequency > 0.0, "channel.carrier_frequency must be > 0");
  require(rho >= 0.0 && rho <= 1.0, "csit.rho must lie in [0, 1]");
  require(pilot_snr > 0.0, "csit.pilot_snr must be > 0");
  require(!error_variance || *error_variance >= 0.0, "csit.error_variance must be >= 0");
  require(samples >= 1, "csit.samples must be >= 1");
  require(!eval_samples || *eval_samples >= 1, "csit.eval_samples must be >= 1");
  require(!strategies.empty(), "experiment.strategies must not be empty");
  require(std::set<Strategy>(strategies.begin(), strategies.end()).size() == strategies.size(),
          "experiment.strategies has duplicates");
  require(!pt_db.empty(), "experiment.pt_db must not be empty");
  require(draws >= 1, "experiment.draws must be >= 1");
  require(!output.empty(), "experiment.output must not be empty");
  require(epsilon > 0.0, "optimizer.epsilon must be > 0");
  require(max_iters >= 1, "optimizer.max_iters must be >= 1");
  require(common_power_fraction >= 0.0 && common_power_fraction <= 1.0,
          "optimizer.common_power_fraction must lie in [0, 1]");
  require(qcqp_tol_gap > 0.0 && qcqp_tol_feas > 0.0, "optimizer QCQP tolerances must be > 0");
  require(qcqp_max_newton >= 1, "optimizer.qcqp_max_newton must be >= 1");
}

ChannelProfile ExperimentConfig::profile() const {
  ChannelProfile p;
  p.rician_factor = std::pow(10.0, rician_factor_db / 10.0);
  p.num_nlos = num_nlos;
  p.nlos_variance = nlos_variance;
  p.max_delay_slots = max_delay_slots;
  p.satellite_velocity = satellite_velocity;
  p.carrier_frequency = carrier_frequency;
  return p;
}

CsitModel ExperimentConfig::csit() const {
  if (error_variance) return CsitModel::with_error_variance(*error_variance, samples);
  return CsitModel::from_formula(rho, pilot_snr, num_nlos, samples);
}

StrategyOptions ExperimentConfig::strategy_options() const {
  StrategyOptions o;
  o.ao.epsilon = epsilon;
  o.ao.max_iters = max_iters;
  o.ao.arrangement = arrangement;
  o.ao.common_power_fraction = common_power_fraction;
  o.ao.qcqp.tol_gap = qcqp_tol_gap;
  o.ao.qcqp.tol_feas = qcqp_tol_feas;
  o.ao.qcqp.max_newton = qcqp_max_newton;
  o.rsma_baseline_starts = rsma_baseline_starts;
  return o;
}

DrawData make_draw(const ExperimentConfig& cfg, int draw, bool idealized) {
  const GridConfig grid = cfg.grid();
  const ChannelProfile profile = cfg.profile();
  const auto d = static_cast<std::uint64_t>(draw);
  std::vector<UserChannel> estimates;
  for (int u = 0; u < cfg.users; ++u) {
    const std::uint64_t seed =
        derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(SeedTag::Paths), d, static_cast<std::uint64_t>(u)});
    auto paths = sample_paths(grid, profile, seed);
    if (idealized) paths = idealize_paths(std::move(paths));
    estimates.push_back(make_user_channel(std::move(paths), grid, cfg.n_t, profile.rician_factor, cfg.noise_var));
  }
  const CsitModel train_model = cfg.csit();
  CsitModel eval_model = train_model;
  eval_model.num_samples = cfg.num_eval_samples();
  SampleSet train = build_sample_set(estimates, grid, cfg.n_t, train_model,
                                     derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(SeedTag::Train), d}));
  SampleSet eval = build_sample_set(estimates, grid, cfg.n_t, eval_model,
                                    derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(SeedTag::Eval), d}));
  PreparedSampleSet train_prepared = prepare_sample_set(train);
  PreparedSampleSet eval_prepared = prepare_sample_set(eval);
  std::vector<PreparedChannel> nominal;
  for (const auto& u : train.users) nominal.push_back(prepare_channel(u.nominal, grid, cfg.n_t, u.noise_var));
  return DrawData{std::move(estimates), std::move(train), std::move(eval), std::move(train_prepared),
                  std::move(eval_prepared), std::move(nominal)};
}

SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    var /= n - 1.0;
    s.std_error = std::sqrt(var / n);
  }
  return s;
}

int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  int n = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("OTFS_RSMA_THREADS")) {
    const std::string v = trim(env);
    int cap = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), cap);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || cap < 1) {
      throw ConfigError("OTFS_RSMA_THREADS must be a positive integer, got '" + v + "'");
    }
    n = std::min(n, cap);
  }
  return std::max(1, n);
}

namespace {

double to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Runs body(draw) for every draw on a bounded worker pool; the first
// exception is rethrown after all workers stop.
void for_each_draw(int draws, const std::function<void(int)>& body) {
  const int workers = std::min(worker_count(), draws);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed) {
      const int d = next++;
      if (d >= draws) return;
      try {
        body(d);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

// Solutions of the requested strategies at one power level. Baselines are
// solved first so RSMA can reuse them.
std::map<Strategy, PrecoderSolution> solve_strategies(const std::vector<Strategy>& strategies,
                                                      const PreparedSampleSet& samples,
                                                      const std::vector<PreparedChannel>& nominal,
                                                      double p_t, const StrategyOptions& opts) {
  auto wants = [&](Strategy s) { return std::find(strategies.begin(), strategies.end(), s) != strategies.end(); };
  const bool starts = wants(Strategy::Rsma) && opts.rsma_baseline_starts;
  std::map<Strategy, PrecoderSolution> out;
  if (wants(Strategy::Sdma) || starts) {
    out.emplace(Strategy::Sdma, optimize_strategy(Strategy::Sdma, samples, nominal, p_t, opts));
  }
  if (wants(Strategy::Noma) || (starts && samples.num_users() == 2)) {
    out.emplace(Strategy::Noma, optimize_strategy(Strategy::Noma, samples, nominal, p_t, opts));
  }
  if (wants(Strategy::Rsma)) {
    BaselineHints hints;
    if (out.count(Strategy::Sdma)) hints.sdma = &out.at(Strategy::Sdma);
    if (out.count(Strategy::Noma)) hints.noma = &out.at(Strategy::Noma);
    out.emplace(Strategy::Rsma, optimize_strategy(Strategy::Rsma, samples, nominal, p_t, opts, hints));
  }
  if (!wants(Strategy::Sdma)) out.erase(Strategy::Sdma);
  if (!wants(Strategy::Noma)) out.erase(Strategy::Noma);
  return out;
}

double evaluate(const PrecoderSolution& sol, const PreparedSampleSet& samples) {
  return sum_rate(sample_average_rates(samples, sol.precoders, sol.layout), sol.layout) / samples.grid.size();
}

std::size_t index_of(const std::vector<Strategy>& v, Strategy s) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
}

std::string pt_label(double pt_db) {
  std::string s = format_double(pt_db);
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

void dump_draw(const ExperimentConfig& cfg, int draw, const DrawData& data) {
  const auto dir = std::filesystem::path(cfg.output) / "channels";
  std::filesystem::create_directories(dir);
  for (std::size_t u = 0; u < data.estimates.size(); ++u) {
    write_matrix_file(dir / ("draw" + std::to_string(draw) + "_user" + std::to_string(u) + "_htd.otfsmat"),
                      data.estimates[u].h_td);
  }
}

void dump_trace(const ExperimentConfig& cfg, Strategy s, double pt_db, int draw, const PrecoderSolution& sol,
                const std::string& suffix = "") {
  const auto dir = std::filesystem::path(cfg.output) / "traces";
  std::filesystem::create_directories(dir);
  write_trace_csv(dir / (to_string(s) + "_pt" + pt_label(pt_db) + "_draw" + std::to_string(draw) + suffix + ".csv"),
                  sol);
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const StrategyOptions opts = cfg.strategy_options();
  const std::size_t per_draw = cfg.strategies.size() * cfg.pt_db.size();
  std::vector<ResultRow> rows(per_draw * static_cast<std::size_t>(cfg.draws));

  for_each_draw(cfg.draws, [&](int d) {
    const DrawData data = make_draw(cfg, d);
    if (cfg.dump_channels) dump_draw(cfg, d, data);
    for (std::size_t pi = 0; pi < cfg.pt_db.size(); ++pi) {
      const auto sols = solve_strategies(cfg.strategies, data.train_prepared, data.nominal,
                                         to_linear(cfg.pt_db[pi]), opts);
      for (const auto& [s, sol] : sols) {
        ResultRow r;
        r.strategy = s;
        r.pt_db = cfg.pt_db[pi];
        r.draw = d;
        r.esr_saf = sol.saf_sum_rate / cfg.grid().size();
        r.esr_oos = evaluate(sol, data.eval_prepared);
        r.iters = sol.iterations;
        r.converged = sol.converged;
        const std::size_t slot = (index_of(cfg.strategies, s) * cfg.pt_db.size() + pi) *
                                     static_cast<std::size_t>(cfg.draws) + static_cast<std::size_t>(d);
        rows[slot] = r;
        if (cfg.dump_traces) dump_trace(cfg, s, cfg.pt_db[pi], d, sol);
      }
    }
  });
  return rows;
}

std::vector<MismatchRow> mismatch_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const StrategyOptions opts = cfg.strategy_options();
  const std::size_t per_draw = cfg.strategies.size() * cfg.pt_db.size();
  std::vector<MismatchRow> rows(per_draw * static_cast<std::size_t>(cfg.draws));

  for_each_draw(cfg.draws, [&](int d) {
    const DrawData real = make_draw(cfg, d, false);
    const DrawData ideal = make_draw(cfg, d, true);
    if (cfg.dump_channels) dump_draw(cfg, d, real);
    for (std::size_t pi = 0; pi < cfg.pt_db.size(); ++pi) {
      const double p_t = to_linear(cfg.pt_db[pi]);
      const auto robust = solve_strategies(cfg.strategies, real.train_prepared, real.nominal, p_t, opts);
      const auto naive = solve_strategies(cfg.strategies, ideal.train_prepared, ideal.nominal, p_t, opts);
      for (Strategy s : cfg.strategies) {
        MismatchRow r;
        r.strategy = s;
        r.pt_db = cfg.pt_db[pi];
        r.draw = d;
        r.ideal_on_ideal = evaluate(naive.at(s), ideal.eval_prepared);
        r.ideal_on_real = evaluate(naive.at(s), real.eval_prepared);
        r.robust_on_real = evaluate(robust.at(s), real.eval_prepared);
        const std::size_t slot = (index_of(cfg.strategies, s) * cfg.pt_db.size() + pi) *
                                     static_cast<std::size_t>(cfg.draws) + static_cast<std::size_t>(d);
        rows[slot] = r;
        if (cfg.dump_traces) {
          dump_trace(cfg, s, cfg.pt_db[pi], d, robust.at(s), "_robust");
          dump_trace(cfg, s, cfg.pt_db[pi], d, naive.at(s), "_ideal");
        }
      }
    }
  });
  return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  return os;
}

std::string common_columns(const ExperimentConfig& cfg, Strategy s, double pt_db) {
  std::ostringstream os;
  os << to_string(s) << ',' << format_double(pt_db) << ',' << format_double(cfg.rho) << ',' << cfg.M << ','
     << cfg.N << ',' << cfg.n_t << ',' << cfg.users << ',' << cfg.samples;
  return os.str();
}

template <typename Row, typename Emit>
void for_each_group(const ExperimentConfig& cfg, const std::vector<Row>& rows, Emit emit) {
  for (Strategy s : cfg.strategies) {
    for (double pt : cfg.pt_db) {
      std::vector<const Row*> group;
      for (const auto& r : rows) {
        if (r.strategy == s && r.pt_db == pt) group.push_back(&r);
      }
      if (!group.empty()) emit(s, pt, group);
    }
  }
}

}  // namespace

void write_results_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       const std::vector<ResultRow>& rows) {
  auto os = open_csv(file);
  os << "strategy,Pt_dB,rho,M,N,Nt,I,L,draw,esr_saf_bits_per_symbol,esr_oos_bits_per_symbol,iters,converged\n";
  for (const auto& r : rows) {
    os << common_columns(cfg, r.strategy, r.pt_db) << ',' << r.draw << ',' << format_double(r.esr_saf) << ','
       << format_double(r.esr_oos) << ',' << r.iters << ',' << (r.converged ? 1 : 0) << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

void write_summary_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       const std::vector<ResultRow>& rows) {
  auto os = open_csv(file);
  os << "strategy,Pt_dB,rho,M,N,Nt,I,L,draws,esr_saf_mean,esr_saf_stderr,esr_oos_mean,esr_oos_stderr,"
        "converged_fraction\n";
  for_each_group(cfg, rows, [&](Strategy s, double pt, const std::vector<const ResultRow*>& g) {
    std::vector<double> saf;
    std::vector<double> oos;
    double conv = 0.0;
    for (const auto* r : g) {
      saf.push_back(r->esr_saf);
      oos.push_back(r->esr_oos);
      conv += r->converged ? 1.0 : 0.0;
    }
    const auto a = summarize(saf);
    const auto b = summarize(oos);
    os << common_columns(cfg, s, pt) << ',' << g.size() << ',' << format_double(a.mean) << ','
       << format_double(a.std_error) << ',' << format_double(b.mean) << ',' << format_double(b.std_error) << ','
       << format_double(conv / static_cast<double>(g.size())) << '\n';
  });
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

void write_mismatch_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                        const std::vector<MismatchRow>& rows) {
  auto os = open_csv(file);
  os << "strategy,Pt_dB,rho,M,N,Nt,I,L,draw,ideal_on_ideal,ideal_on_real,robust_on_real\n";
  for (const auto& r : rows) {
    os << common_columns(cfg, r.strategy, r.pt_db) << ',' << r.draw << ',' << format_double(r.ideal_on_ideal)
       << ',' << format_double(r.ideal_on_real) << ',' << format_double(r.robust_on_real) << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

void write_mismatch_summary_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                                const std::vector<MismatchRow>& rows) {
  auto os = open_csv(file);
  os << "strategy,Pt_dB,rho,M,N,Nt,I,L,draws,ideal_on_ideal_mean,ideal_on_ideal_stderr,ideal_on_real_mean,"
        "ideal_on_real_stderr,robust_on_real_mean,robust_on_real_stderr\n";
  for_each_group(cfg, rows, [&](Strategy s, double pt, const std::vector<const MismatchRow*>& g) {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
    for (const auto* r : g) {
      a.push_back(r->ideal_on_ideal);
      b.push_back(r->ideal_on_real);
      c.push_back(r->robust_on_real);
    }
    os << common_columns(cfg, s, pt) << ',' << g.size();
    for (const auto& v : {summarize(a), summarize(b), summarize(c)}) {
      os << ',' << format_double(v.mean) << ',' << format_double(v.std_error);
    }
    os << '\n';
  });
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

void run_and_write(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path out(cfg.output);
  std::filesystem::create_directories(out);
  {
    std::ofstream echo(out / "config_echo.ini");
    if (!echo) throw std::runtime_error("cannot write into " + out.string());
    echo << cfg.to_text();
  }
  if (cfg.mode == ExperimentMode::Standard) {
    const auto rows = run_experiment(cfg);
    write_results_csv(out / "results.csv", cfg, rows);
    write_summary_csv(out / "summary.csv", cfg, rows);
  } else {
    const auto rows = mismatch_experiment(cfg);
    write_mismatch_csv(out / "mismatch.csv", cfg, rows);
    write_mismatch_summary_csv(out / "mismatch_summary.csv", cfg, rows);
  }
}

}  // namespace otfs_rsma
