#pragma once

// Run configuration (JSON) and the model registry.
//
// {
//   "format": "abcbl-config v1",
//   "model": {"id": "mixture", "p": 3, "omega": 0.3, "rho": 0.7, "prior_lo": -20, "prior_hi": 40},
//   "n": 100000, "seed": 1,
//   "s_obs": [5, 5, 5],                      or "theta_true": [...]
//   "keep": 2000, "kernel": "uniform",
//   "methods": ["rejection", "linear", "hetero"],
//   "ridge": 1e-8, "shrinkage": 0,
//   "hetero": {"degree": 2, "constant_scale": false},
//   "marginals": [{"param": 1, "stats": [1], "keep": 2000, "adjustment": "match", "semi_automatic": false}],
//   "output": "out", "threads": 1
// }
//
// Parameter and statistic indices in the file are 1-based. Other model ids:
//   {"id": "conjugate", "p": 1}
//   {"id": "external", "command": "./sim", "p": 2, "d": 3,
//    "prior": {"kind": "uniform", "lo": 0, "hi": 1}}      or {"kind": "normal", "mean": 0, "sd": 1}

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abcbl/core.hpp"
#include "abcbl/marginal.hpp"
#include "abcbl/models.hpp"
#include "abcbl/regress.hpp"

namespace abcbl {

inline constexpr const char* kConfigFormat = "abcbl-config v1";

struct PriorConfig {
  std::string kind = "uniform";  // uniform | normal
  double a = 0.0;                // lo or mean
  double b = 1.0;                // hi or sd
};

struct ModelConfig {
  std::string id = "mixture";
  MixtureModelConfig mixture;
  int p = 1;  // conjugate and external
  int d = 1;  // external
  std::string command;
  PriorConfig prior;
};

struct MarginalSpecConfig {
  Eigen::Index param = 0;  // 0-based in memory
  std::vector<Eigen::Index> stats;
  Eigen::Index keep = 0;
  std::optional<Adjustment> adjustment;  // nullopt: same as the joint method
  bool semi_automatic = false;

  MarginalSpec resolve(Adjustment joint_method) const;
};

struct RunConfig {
  ModelConfig model;
  Eigen::Index n = 100000;
  std::uint64_t seed = 1;
  std::vector<double> s_obs;
  std::vector<double> theta_true;
  Eigen::Index keep = 2000;
  KernelKind kernel = KernelKind::uniform;
  std::vector<Adjustment> methods{Adjustment::none, Adjustment::linear};
  AdjustOptions adjust;
  double shrinkage = 0.0;
  std::vector<MarginalSpecConfig> marginals;
  std::string output = "out";
  unsigned threads = 1;

  // Checks everything that can be checked without touching the table.
  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

struct ModelInstance {
  std::unique_ptr<Simulator> simulator;
  std::unique_ptr<Prior> prior;
};

// Registry keyed by model id: mixture, conjugate, external.
ModelInstance make_model(const ModelConfig& config);
std::vector<std::string> registered_models();

struct BenchmarkConfig {
  std::vector<int> dims{1, 2, 3, 4, 5};
  int replicates = 10;
  std::uint64_t seed = 1;
  Eigen::Index n = 100000;
  Eigen::Index keep = 2000;
  double omega = 0.3;
  double rho = 0.7;
  double s_value = 5.0;
  double prior_lo = -20.0;
  double prior_hi = 40.0;
  Eigen::Index oracle_draws = 2000;
  std::string output = "bench";
  unsigned threads = 1;

  void validate() const;
};

BenchmarkConfig parse_benchmark_config(const std::string& json_text);
std::string serialize_benchmark_config(const BenchmarkConfig& config);

}  // namespace abcbl
