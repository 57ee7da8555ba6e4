// SPDX-License-Identifier: Apache-2.0
//
// otfs-rsma run --config <path> [--strategies rsma,sdma,noma] [--out <dir>]
//               [--seed <u64>] [--mode standard|mismatch]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "otfs_rsma/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace otfs_rsma;

  CLI::App app{"Robust RSMA precoding for OTFS LEO satellite links"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run a Monte-Carlo experiment");

  std::string config_path;
  std::optional<std::string> strategies;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  run->add_option("--config", config_path, "Experiment configuration file")->required();
  run->add_option("--strategies", strategies, "Comma-separated subset of rsma,sdma,noma");
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--mode", mode, "standard or mismatch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    // Overrides go through the same parser so they get the same checks.
    std::ostringstream extra;
    if (strategies) extra << "strategies = " << *strategies << '\n';
    if (out) extra << "output = " << *out << '\n';
    if (seed) extra << "master_seed = " << *seed << '\n';
    if (mode) extra << "mode = " << *mode << '\n';
    if (!extra.str().empty()) {
      const ExperimentConfig over = ExperimentConfig::parse("[experiment]\n" + extra.str());
      if (strategies) cfg.strategies = over.strategies;
      if (out) cfg.output = over.output;
      if (seed) cfg.master_seed = over.master_seed;
      if (mode) cfg.mode = over.mode;
    }
    cfg.validate();
    run_and_write(cfg);
    std::cout << "wrote " << cfg.output << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
