#include "abcbl/commands.hpp"

#include <chrono>
#include <json.hpp>
#include <map>
#include <system_error>

#include "abcbl/blin.hpp"
#include "abcbl/errors.hpp"
#include "abcbl/eval.hpp"
#include "abcbl/marginal.hpp"
#include "abcbl/models.hpp"
#include "abcbl/regress.hpp"
#include "abcbl/simd/kernels.hpp"
#include "abcbl/table_io.hpp"

namespace abcbl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr std::uint64_t kObservedStream = 0x6f62736572766564ULL;
constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL;

class Run {
 public:
  Run(std::string command, fs::path out, json config) : command_(std::move(command)), out_(std::move(out)) {
    config_ = std::move(config);
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory " + out_.string() + ": " + ec.message());
    fs::remove(out_ / kManifestName, ec);
    if (ec) throw IoError("cannot remove stale manifest in " + out_.string() + ": " + ec.message());
  }

  template <class F>
  auto stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(name, start);
      } else {
        auto result = body();
        record(name, start);
        return result;
      }
    } catch (...) {
      rethrow_with_stage(name);
    }
  }

  void write(const std::string& name, const std::string& contents) {
    write_file_atomic(out_ / name, contents);
    result_.artifacts.push_back(name);
  }

  void add_artifact(const std::string& name) { result_.artifacts.push_back(name); }

  void warn(const std::string& message) { result_.warnings.push_back(message); }

  CommandResult finish() {
    json m;
    m["format"] = kManifestFormat;
    m["version"] = kVersion;
    m["command"] = command_;
    m["config"] = config_;
    m["artifacts"] = result_.artifacts;
    m["timings_seconds"] = timings_;
    m["warnings"] = result_.warnings;
    m["simd"] = std::string(to_string(simd::active_isa()));
    write_file_atomic(out_ / kManifestName, m.dump(2) + "\n");
    result_.output_dir = out_;
    return result_;
  }

  const fs::path& dir() const { return out_; }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    timings_.push_back({{"stage", name},
                        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
  }

  std::string command_;
  fs::path out_;
  json config_;
  json timings_ = json::array();
  CommandResult result_;
};

void write_sample_artifact(Run& run, const std::string& name, const AdjustedSample& sample) {
  write_sample(run.dir() / name, sample);
  run.add_artifact(name);
  run.add_artifact(sidecar_path(name).string());
  for (const auto& w : sample.warnings) run.warn(name + ": " + w);
}

std::string method_stem(Adjustment a) { return std::string(to_string(a)); }

}  // namespace

CommandResult cmd_simulate(const RunConfig& config) {
  config.validate();
  Run run("simulate", config.output, json::parse(serialize_run_config(config)));
  const ModelInstance model = make_model(config.model);
  const ReferenceTable table = run.stage("simulate", [&] {
    return build_reference_table(*model.simulator, *model.prior, config.n, config.seed,
                                 BuildOptions{config.threads, 10});
  });
  run.stage("write-table", [&] {
    write_table(run.dir() / "table.csv", table);
    run.add_artifact("table.csv");
    run.add_artifact(sidecar_path("table.csv").string());
  });
  return run.finish();
}

Eigen::VectorXd resolve_observed(const RunConfig& config, const Simulator& simulator) {
  if (!config.s_obs.empty()) return Eigen::Map<const Eigen::VectorXd>(config.s_obs.data(), std::ssize(config.s_obs));
  const Eigen::VectorXd theta =
      Eigen::Map<const Eigen::VectorXd>(config.theta_true.data(), std::ssize(config.theta_true));
  Rng rng = make_stream(config.seed, {kObservedStream});
  Eigen::VectorXd s = simulator.draw(theta, rng);
  if (s.size() != simulator.stat_dim() || !s.allFinite())
    throw NumericalError("simulating the observed statistics from theta_true failed");
  return s;
}

CommandResult cmd_infer(const RunConfig& config, const fs::path& table_path) {
  config.validate();
  if (!fs::exists(table_path)) throw IoError("reference table not found: " + table_path.string());
  Run run("infer", config.output, json::parse(serialize_run_config(config)));
  const ModelInstance model = make_model(config.model);

  const ReferenceTable table = run.stage("read-table", [&] { return read_table(table_path); });
  if (table.p() != model.simulator->param_dim() || table.d() != model.simulator->stat_dim())
    throw ValidationError("table " + table_path.string() + " has p=" + std::to_string(table.p()) +
                          ", d=" + std::to_string(table.d()) + ", which does not match the configured model");
  if (table.model_id != model.simulator->id())
    throw ValidationError("table was simulated from model '" + table.model_id + "', config names '" +
                          model.simulator->id() + "'");
  if (config.keep > table.rows()) throw ValidationError("keep exceeds the table size");
  for (const auto& m : config.marginals)
    if (m.keep > table.rows()) throw ValidationError("marginal keep exceeds the table size");

  const Eigen::VectorXd s_obs = run.stage("observed", [&] { return resolve_observed(config, *model.simulator); });

  const BayesLinearSummary summary = run.stage("bayes-linear", [&] {
    const MomentEstimate moments = estimate_moments(table, config.shrinkage);
    return bayes_linear_summary(moments, s_obs, table.param_names);
  });
  run.write("bayes_linear.txt", format_summary(summary));

  std::vector<std::string> theta_names;
  for (const auto& n : table.param_names) theta_names.push_back("theta_" + n);

  for (const Adjustment method : config.methods) {
    const std::string stem = method_stem(method);
    JointConfig joint{config.keep, config.kernel, method, config.adjust, config.threads};
    joint.options.hetero.ridge = config.adjust.ridge;

    auto emit = [&](const std::string& name, AdjustedSample sample) {
      flag_out_of_support(sample, *model.prior);
      write_sample_artifact(run, name + ".csv", sample);
      const MomentReport report = moment_report(sample.values, summary.adjusted_mean, summary.adjusted_var);
      run.write(name + "_moments.txt", format_moment_report(report, table.param_names));
    };

    if (config.marginals.empty()) {
      AdjustedSample sample = run.stage("infer/" + stem, [&] { return joint_sample(table, s_obs, joint); });
      emit(stem, std::move(sample));
      continue;
    }
    std::vector<MarginalSpec> specs;
    for (const auto& m : config.marginals) specs.push_back(m.resolve(method));
    MarginalAdjustResult result =
        run.stage("infer/" + stem + "+marginal", [&] { return marginal_adjust_pipeline(table, s_obs, joint, specs); });
    emit(stem, std::move(result.joint));
    emit(stem + "_marginal", std::move(result.sample));
    for (const auto& m : result.marginals) {
      const auto j = static_cast<std::size_t>(m.spec.param);
      const Eigen::MatrixXd column = Eigen::Map<const Eigen::VectorXd>(m.values.data(), m.m());
      run.write("marginal_" + stem + "_" + theta_names[j] + ".csv",
                matrix_to_csv(kMarginalFormat, {theta_names[j]}, column));
    }
  }
  return run.finish();
}

const std::vector<std::string>& benchmark_methods() {
  static const std::vector<std::string> methods{"rejection", "linear", "rejection_marginal", "linear_marginal"};
  return methods;
}

std::vector<KlRow> benchmark_replicate(const BenchmarkConfig& config, int p, int replicate) {
  const MixtureModelConfig mc{p, config.omega, config.rho, config.prior_lo, config.prior_hi};
  const MixtureModel model(mc);
  const UniformBoxPrior prior = model.prior();
  const std::uint64_t seed =
      derive_seed(config.seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(replicate)});
  const ReferenceTable table = build_reference_table(model, prior, config.n, seed, BuildOptions{config.threads, 10});
  const Eigen::VectorXd s_obs = Eigen::VectorXd::Constant(p, config.s_value);

  Rng oracle_rng = make_stream(seed, {kOracleStream});
  const MixturePosterior posterior(s_obs, mc, oracle_rng);
  const int k = std::min(p, 2);
  const Eigen::MatrixXd oracle_draws = posterior.sample(config.oracle_draws, oracle_rng).leftCols(k);
  const MixtureMarginalOracle oracle(posterior, k);
  const LogPdf log_pdf = [&oracle](const Eigen::Ref<const Eigen::VectorXd>& x) { return oracle.log_pdf(x); };

  std::map<std::string, KlReport> reports;
  for (const Adjustment adj : {Adjustment::none, Adjustment::linear}) {
    const JointConfig joint{config.keep, KernelKind::uniform, adj, AdjustOptions{}, config.threads};
    std::vector<MarginalSpec> specs;
    for (Eigen::Index j = 0; j < p; ++j) specs.push_back(MarginalSpec{j, {j}, config.keep, adj, false});
    const MarginalAdjustResult result = marginal_adjust_pipeline(table, s_obs, joint, specs);
    const std::string stem = adj == Adjustment::none ? "rejection" : "linear";
    reports[stem] = kl_divergence(oracle_draws, log_pdf, result.joint.values.leftCols(k), config.threads);
    reports[stem + "_marginal"] = kl_divergence(oracle_draws, log_pdf, result.sample.values.leftCols(k), config.threads);
  }

  std::vector<KlRow> rows;
  for (const auto& method : benchmark_methods()) {
    const KlReport& r = reports.at(method);
    rows.push_back(KlRow{method, p, replicate, r.estimate, r.standard_error, r.floor_hits});
  }
  return rows;
}

std::string format_kl_table(const std::vector<KlRow>& rows) {
  std::string out = std::string("# ") + kKlTableFormat + "\nmethod,p,replicate,kl,stderr,floor_hits\n";
  for (const auto& r : rows)
    out += r.method + "," + std::to_string(r.p) + "," + std::to_string(r.replicate) + "," + format_double(r.kl) +
           "," + format_double(r.standard_error) + "," + std::to_string(r.floor_hits) + "\n";
  return out;
}

std::string format_kl_plot(const std::vector<KlRow>& rows) {
  std::vector<int> dims;
  std::map<std::pair<int, std::string>, std::pair<double, int>> sums;
  for (const auto& r : rows) {
    if (std::find(dims.begin(), dims.end(), r.p) == dims.end()) dims.push_back(r.p);
    auto& [sum, count] = sums[{r.p, r.method}];
    sum += r.kl;
    ++count;
  }
  std::string out = std::string("# ") + kKlPlotFormat + "\np";
  for (const auto& m : benchmark_methods()) out += "," + m;
  out += "\n";
  for (int p : dims) {
    out += std::to_string(p);
    for (const auto& m : benchmark_methods()) {
      const auto it = sums.find({p, m});
      out += ",";
      out += it == sums.end() ? std::string("nan") : format_double(it->second.first / it->second.second);
    }
    out += "\n";
  }
  return out;
}

CommandResult cmd_benchmark(const BenchmarkConfig& config) {
  config.validate();
  Run run("benchmark", config.output, json::parse(serialize_benchmark_config(config)));
  std::vector<KlRow> rows;
  for (int p : config.dims) {
    for (int rep = 0; rep < config.replicates; ++rep) {
      auto part = run.stage("benchmark/p=" + std::to_string(p) + "/replicate=" + std::to_string(rep),
                            [&] { return benchmark_replicate(config, p, rep); });
      for (const auto& r : part)
        if (r.floor_hits > 0)
          run.warn("p=" + std::to_string(p) + " replicate " + std::to_string(rep) + " " + r.method + ": " +
                   std::to_string(r.floor_hits) + " KDE density floor hits");
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  run.write("kl_table.csv", format_kl_table(rows));
  run.write("kl_plot.csv", format_kl_plot(rows));
  return run.finish();
}

}  // namespace abcbl
