#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "abcbl/commands.hpp"
#include "abcbl/config.hpp"
#include "abcbl/errors.hpp"
#include "abcbl/table_io.hpp"

namespace {

void report(const abcbl::CommandResult& result) {
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << result.artifacts.size() << " artifacts and manifest.json to " << result.output_dir.string()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-free inference: rejection ABC, regression and marginal adjustment, Bayes linear analysis"};
  app.set_version_flag("--version", abcbl::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the configured seed");
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it");
    cmd->add_option("--out", out, "Output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a reference table");
  simulate->add_option("--config", config_path, "Run configuration (JSON)")->required();
  add_common(simulate);

  std::string table_path;
  auto* infer = app.add_subcommand("infer", "Run ABC methods on a reference table");
  infer->add_option("--config", config_path, "Run configuration (JSON)")->required();
  infer->add_option("--table", table_path, "Reference table (default: <out>/table.csv)");
  add_common(infer);

  std::vector<int> dims;
  std::optional<int> replicates;
  std::optional<long long> n, keep, oracle_draws;
  auto* bench = app.add_subcommand("benchmark", "Gaussian-mixture KL benchmark");
  bench->add_option("--config", config_path, "Benchmark configuration (JSON)");
  bench->add_option("--dims", dims, "Model dimensions")->delimiter(',');
  bench->add_option("--replicates", replicates, "Replicates per dimension");
  bench->add_option("--n", n, "Simulations per replicate");
  bench->add_option("--keep", keep, "Accepted draws");
  bench->add_option("--oracle-draws", oracle_draws, "Exact posterior draws for the KL estimate");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed() || infer->parsed()) {
      abcbl::RunConfig config = abcbl::load_run_config(config_path);
      if (seed) config.seed = *seed;
      if (threads) config.threads = *threads;
      if (out) config.output = *out;
      if (simulate->parsed()) {
        report(abcbl::cmd_simulate(config));
      } else {
        if (table_path.empty()) table_path = (std::filesystem::path(config.output) / "table.csv").string();
        report(abcbl::cmd_infer(config, table_path));
      }
    } else {
      abcbl::BenchmarkConfig config;
      if (!config_path.empty()) config = abcbl::parse_benchmark_config(abcbl::read_file(config_path));
      if (!dims.empty()) config.dims = dims;
      if (replicates) config.replicates = *replicates;
      if (n) config.n = *n;
      if (keep) config.keep = *keep;
      if (oracle_draws) config.oracle_draws = *oracle_draws;
      if (seed) config.seed = *seed;
      if (threads) config.threads = *threads;
      if (out) config.output = *out;
      report(abcbl::cmd_benchmark(config));
    }
  } catch (const abcbl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
