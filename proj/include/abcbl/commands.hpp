#pragma once

// Pipeline stages behind the command-line tool. Stages communicate through
// files only; every command writes manifest.json last.

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "abcbl/config.hpp"
#include "abcbl/core.hpp"

namespace abcbl {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestFormat = "abcbl-manifest v1";
inline constexpr const char* kKlTableFormat = "abcbl-kl v1";
inline constexpr const char* kKlPlotFormat = "abcbl-kl-plot v1";
inline constexpr const char* kMarginalFormat = "abcbl-marginal v1";

struct CommandResult {
  std::filesystem::path output_dir;
  std::vector<std::string> artifacts;  // relative to output_dir, manifest excluded
  std::vector<std::string> warnings;
};

// Writes <out>/table.csv and its sidecar.
CommandResult cmd_simulate(const RunConfig& config);

// Observed statistics from the config, simulating from theta_true when given.
Eigen::VectorXd resolve_observed(const RunConfig& config, const Simulator& simulator);

// Runs every configured method, plain and (with marginal specs) marginal-
// adjusted, on the table at `table_path`.
CommandResult cmd_infer(const RunConfig& config, const std::filesystem::path& table_path);

struct KlRow {
  std::string method;
  int p = 0;
  int replicate = 0;
  double kl = 0.0;
  double standard_error = 0.0;
  Eigen::Index floor_hits = 0;
};

// Benchmark variants, in output order.
const std::vector<std::string>& benchmark_methods();

// One replicate at dimension p: simulate, run the four variants and compute
// KL on (theta_1, theta_2) (theta_1 alone when p = 1) against the exact oracle.
std::vector<KlRow> benchmark_replicate(const BenchmarkConfig& config, int p, int replicate);

std::string format_kl_table(const std::vector<KlRow>& rows);
std::string format_kl_plot(const std::vector<KlRow>& rows);

// Writes <out>/kl_table.csv and <out>/kl_plot.csv.
CommandResult cmd_benchmark(const BenchmarkConfig& config);

}  // namespace abcbl
