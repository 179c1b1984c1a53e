// qtrust: experiment runner and report aggregator.
//
//   qtrust run <config.json> --out <dir> [--seed N --replicates K --threads T]
//   qtrust report <dir>...
//
// Environment overrides: QTRUST_SEED, QTRUST_THREADS (command-line flags win).
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qtrust/csv.hpp"
#include "qtrust/experiments.hpp"

namespace {

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return std::nullopt;
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    throw qtrust::experiments::ConfigError(std::string(name) + ": not a valid integer");
  }
}

int run_command(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed, std::optional<int> replicates,
                std::optional<int> threads) {
  qtrust::experiments::ExperimentConfig cfg;
  try {
    cfg = qtrust::experiments::parse_config_file(config_path);
    if (!seed) seed = env_u64("QTRUST_SEED");
    if (seed) cfg.seed = *seed;
    if (replicates) {
      if (*replicates < 1) throw qtrust::experiments::ConfigError("--replicates must be >= 1");
      cfg.replicates = *replicates;
    }
    int n_threads = 1;
    if (auto env_threads = env_u64("QTRUST_THREADS")) {
      n_threads = static_cast<int>(*env_threads);
    }
    if (threads) n_threads = *threads;
    if (n_threads < 1) throw qtrust::experiments::ConfigError("--threads must be >= 1");

    qtrust::experiments::run_experiment(cfg, out_dir, n_threads);
  } catch (const qtrust::experiments::ConfigError& e) {
    std::cerr << "qtrust: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "qtrust: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int report_command(const std::vector<std::string>& dirs) {
  try {
    auto rows = qtrust::experiments::report(dirs);
    std::cout << "metric,mean,std,n\n";
    for (const auto& row : rows) {
      std::cout << qtrust::csv::quote_field(row.metric) << ','
                << qtrust::csv::format_double(row.mean) << ','
                << qtrust::csv::format_double(row.stddev) << ',' << row.n << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "qtrust: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust assessment experiments for variational quantum classifiers"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates, threads;
  auto* run = app.add_subcommand("run", "Execute an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Master seed override");
  run->add_option("--replicates", replicates, "Replicate count override");
  run->add_option("--threads", threads, "Worker threads for replicates");

  std::vector<std::string> report_dirs;
  auto* report = app.add_subcommand("report", "Aggregate completed run directories");
  report->add_option("dirs", report_dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (run->parsed()) return run_command(config_path, out_dir, seed, replicates, threads);
  return report_command(report_dirs);
}
