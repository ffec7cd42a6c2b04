#include "abcbl/config.hpp"

#include <json.hpp>
#include <set>

#include "abcbl/errors.hpp"
#include "abcbl/table_io.hpp"

namespace abcbl {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

std::vector<Eigen::Index> to_zero_based(const std::vector<long long>& v, const char* what) {
  std::vector<Eigen::Index> out;
  for (auto x : v) {
    if (x < 1) throw ValidationError(std::string(what) + " indices are 1-based and must be positive");
    out.push_back(static_cast<Eigen::Index>(x - 1));
  }
  return out;
}

json model_to_json(const ModelConfig& m) {
  json j{{"id", m.id}};
  if (m.id == "mixture") {
    j["p"] = m.mixture.p;
    j["omega"] = m.mixture.omega;
    j["rho"] = m.mixture.rho;
    j["prior_lo"] = m.mixture.prior_lo;
    j["prior_hi"] = m.mixture.prior_hi;
  } else if (m.id == "conjugate") {
    j["p"] = m.p;
  } else {
    j["p"] = m.p;
    j["d"] = m.d;
    j["command"] = m.command;
    if (m.prior.kind == "normal")
      j["prior"] = {{"kind", "normal"}, {"mean", m.prior.a}, {"sd", m.prior.b}};
    else
      j["prior"] = {{"kind", "uniform"}, {"lo", m.prior.a}, {"hi", m.prior.b}};
  }
  return j;
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.id = get_or<std::string>(j, "id", "mixture");
  if (m.id == "mixture") {
    check_keys(j, {"id", "p", "omega", "rho", "prior_lo", "prior_hi"}, "model");
    m.mixture.p = get_or(j, "p", 1);
    m.mixture.omega = get_or(j, "omega", 0.3);
    m.mixture.rho = get_or(j, "rho", 0.7);
    m.mixture.prior_lo = get_or(j, "prior_lo", -20.0);
    m.mixture.prior_hi = get_or(j, "prior_hi", 40.0);
    m.p = m.d = m.mixture.p;
  } else if (m.id == "conjugate") {
    check_keys(j, {"id", "p"}, "model");
    m.p = m.d = get_or(j, "p", 1);
  } else if (m.id == "external") {
    check_keys(j, {"id", "p", "d", "command", "prior"}, "model");
    m.p = get_or(j, "p", 1);
    m.d = get_or(j, "d", 1);
    m.command = get_or<std::string>(j, "command", "");
    if (!j.contains("prior")) throw ValidationError("external model needs a prior");
    const json& pj = j.at("prior");
    m.prior.kind = get_or<std::string>(pj, "kind", "uniform");
    if (m.prior.kind == "uniform") {
      check_keys(pj, {"kind", "lo", "hi"}, "model.prior");
      m.prior.a = get_or(pj, "lo", 0.0);
      m.prior.b = get_or(pj, "hi", 1.0);
    } else if (m.prior.kind == "normal") {
      check_keys(pj, {"kind", "mean", "sd"}, "model.prior");
      m.prior.a = get_or(pj, "mean", 0.0);
      m.prior.b = get_or(pj, "sd", 1.0);
    } else {
      throw ValidationError("unknown prior kind '" + m.prior.kind + "'");
    }
  } else {
    throw ValidationError("unknown model id '" + m.id + "'");
  }
  return m;
}

}  // namespace

MarginalSpec MarginalSpecConfig::resolve(Adjustment joint_method) const {
  return MarginalSpec{param, stats, keep, adjustment.value_or(joint_method), semi_automatic};
}

void RunConfig::validate() const {
  if (n < 2) throw ValidationError("n must be at least 2, got " + std::to_string(n));
  if (keep < 1 || keep > n) throw ValidationError("keep must lie in [1, n]");
  if (s_obs.empty() == theta_true.empty()) throw ValidationError("give exactly one of s_obs and theta_true");
  if (methods.empty()) throw ValidationError("at least one method is required");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ValidationError("shrinkage must lie in [0, 1]");
  if (!(adjust.ridge >= 0.0)) throw ValidationError("ridge must be non-negative");
  if (adjust.hetero.degree != 1 && adjust.hetero.degree != 2) throw ValidationError("hetero degree must be 1 or 2");
  if (output.empty()) throw ValidationError("output directory must be set");
  const ModelInstance model = make_model(this->model);
  const auto p = model.simulator->param_dim();
  const auto d = model.simulator->stat_dim();
  if (!s_obs.empty() && static_cast<Eigen::Index>(s_obs.size()) != d)
    throw ValidationError("s_obs has " + std::to_string(s_obs.size()) + " entries, model has " + std::to_string(d) +
                          " statistics");
  if (!theta_true.empty() && static_cast<Eigen::Index>(theta_true.size()) != p)
    throw ValidationError("theta_true has wrong dimension");
  std::set<Eigen::Index> params;
  for (const auto& m : marginals) {
    if (m.param < 0 || m.param >= p) throw ValidationError("marginal spec: parameter index out of range");
    if (!params.insert(m.param).second) throw ValidationError("marginal specs must name distinct parameters");
    if (m.stats.empty()) throw ValidationError("marginal spec: empty statistic subset");
    for (auto k : m.stats)
      if (k < 0 || k >= d) throw ValidationError("marginal spec: statistic index out of range");
    if (m.keep < 1 || m.keep > n) throw ValidationError("marginal spec: keep must lie in [1, n]");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"format", "model", "n", "seed", "s_obs", "theta_true", "keep", "kernel", "methods", "ridge",
                 "shrinkage", "hetero", "marginals", "output", "threads"},
             "config");
  if (j.contains("format") && j["format"] != kConfigFormat)
    throw ValidationError("unsupported config format '" + j["format"].dump() + "'");
  RunConfig c;
  if (j.contains("model")) c.model = model_from_json(j["model"]);
  c.n = get_or<long long>(j, "n", c.n);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.s_obs = get_or<std::vector<double>>(j, "s_obs", {});
  c.theta_true = get_or<std::vector<double>>(j, "theta_true", {});
  c.keep = get_or<long long>(j, "keep", c.keep);
  c.kernel = parse_kernel_kind(get_or<std::string>(j, "kernel", "uniform"));
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get_or<std::vector<std::string>>(j, "methods", {})) c.methods.push_back(parse_adjustment(m));
  }
  c.adjust.ridge = get_or(j, "ridge", c.adjust.ridge);
  c.adjust.hetero.ridge = c.adjust.ridge;
  c.shrinkage = get_or(j, "shrinkage", 0.0);
  if (j.contains("hetero")) {
    check_keys(j["hetero"], {"degree", "constant_scale"}, "hetero");
    c.adjust.hetero.degree = get_or(j["hetero"], "degree", 2);
    c.adjust.hetero.constant_scale = get_or(j["hetero"], "constant_scale", false);
  }
  if (j.contains("marginals")) {
    for (const auto& mj : j["marginals"]) {
      check_keys(mj, {"param", "stats", "keep", "adjustment", "semi_automatic"}, "marginals[]");
      MarginalSpecConfig m;
      const auto param = get_or<long long>(mj, "param", 0);
      if (param < 1) throw ValidationError("marginals[]: param is 1-based and required");
      m.param = static_cast<Eigen::Index>(param - 1);
      m.stats = to_zero_based(get_or<std::vector<long long>>(mj, "stats", {}), "stats");
      m.keep = get_or<long long>(mj, "keep", c.keep);
      const auto adj = get_or<std::string>(mj, "adjustment", "match");
      if (adj != "match") m.adjustment = parse_adjustment(adj);
      m.semi_automatic = get_or(mj, "semi_automatic", false);
      c.marginals.push_back(std::move(m));
    }
  }
  c.output = get_or<std::string>(j, "output", c.output);
  c.threads = get_or<unsigned>(j, "threads", 1u);
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string serialize_run_config(const RunConfig& c) {
  json j;
  j["format"] = kConfigFormat;
  j["model"] = model_to_json(c.model);
  j["n"] = c.n;
  j["seed"] = c.seed;
  if (!c.s_obs.empty()) j["s_obs"] = c.s_obs;
  if (!c.theta_true.empty()) j["theta_true"] = c.theta_true;
  j["keep"] = c.keep;
  j["kernel"] = std::string(to_string(c.kernel));
  j["methods"] = json::array();
  for (auto m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["ridge"] = c.adjust.ridge;
  j["shrinkage"] = c.shrinkage;
  j["hetero"] = {{"degree", c.adjust.hetero.degree}, {"constant_scale", c.adjust.hetero.constant_scale}};
  j["marginals"] = json::array();
  for (const auto& m : c.marginals) {
    json mj{{"param", m.param + 1}, {"keep", m.keep}, {"semi_automatic", m.semi_automatic}};
    mj["stats"] = json::array();
    for (auto k : m.stats) mj["stats"].push_back(k + 1);
    mj["adjustment"] = m.adjustment ? std::string(to_string(*m.adjustment)) : std::string("match");
    j["marginals"].push_back(mj);
  }
  j["output"] = c.output;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

ModelInstance make_model(const ModelConfig& config) {
  ModelInstance m;
  if (config.id == "mixture") {
    auto model = std::make_unique<MixtureModel>(config.mixture);
    m.prior = std::make_unique<UniformBoxPrior>(model->prior());
    m.simulator = std::move(model);
  } else if (config.id == "conjugate") {
    if (config.p < 1) throw ValidationError("conjugate model: p must be positive");
    m.simulator = std::make_unique<ConjugateGaussianModel>(config.p);
    m.prior = std::make_unique<NormalPrior>(config.p, 0.0, 1.0);
  } else if (config.id == "external") {
    m.simulator = std::make_unique<ExternalSimulator>(config.command, config.p, config.d);
    if (config.prior.kind == "normal")
      m.prior = std::make_unique<NormalPrior>(config.p, config.prior.a, config.prior.b);
    else
      m.prior = std::make_unique<UniformBoxPrior>(config.p, config.prior.a, config.prior.b);
  } else {
    throw ValidationError("unknown model id '" + config.id + "'");
  }
  return m;
}

std::vector<std::string> registered_models() { return {"mixture", "conjugate", "external"}; }

void BenchmarkConfig::validate() const {
  if (dims.empty()) throw ValidationError("benchmark: dims must be nonempty");
  for (int p : dims)
    if (p < 1 || p > MixtureModel::kMaxEnumerationDim) throw ValidationError("benchmark: dimension out of range");
  if (replicates < 1) throw ValidationError("benchmark: replicates must be positive");
  if (n < 2 || keep < 2 || keep > n) throw ValidationError("benchmark: need 2 <= keep <= n");
  if (oracle_draws < 2) throw ValidationError("benchmark: need at least 2 oracle draws");
  MixtureModelConfig{dims.front(), omega, rho, prior_lo, prior_hi}.validate();
  for (int p : dims) MixtureModelConfig{p, omega, rho, prior_lo, prior_hi}.validate();
}

BenchmarkConfig parse_benchmark_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("benchmark config is not valid JSON: ") + e.what());
  }
  if (j.contains("benchmark")) j = j["benchmark"];
  check_keys(j, {"dims", "replicates", "seed", "n", "keep", "omega", "rho", "s_value", "prior_lo", "prior_hi",
                 "oracle_draws", "output", "threads"},
             "benchmark");
  BenchmarkConfig c;
  c.dims = get_or(j, "dims", c.dims);
  c.replicates = get_or(j, "replicates", c.replicates);
  c.seed = get_or(j, "seed", c.seed);
  c.n = get_or<long long>(j, "n", c.n);
  c.keep = get_or<long long>(j, "keep", c.keep);
  c.omega = get_or(j, "omega", c.omega);
  c.rho = get_or(j, "rho", c.rho);
  c.s_value = get_or(j, "s_value", c.s_value);
  c.prior_lo = get_or(j, "prior_lo", c.prior_lo);
  c.prior_hi = get_or(j, "prior_hi", c.prior_hi);
  c.oracle_draws = get_or<long long>(j, "oracle_draws", c.oracle_draws);
  c.output = get_or(j, "output", c.output);
  c.threads = get_or(j, "threads", c.threads);
  return c;
}

std::string serialize_benchmark_config(const BenchmarkConfig& c) {
  json j{{"dims", c.dims},         {"replicates", c.replicates}, {"seed", c.seed},
         {"n", c.n},               {"keep", c.keep},             {"omega", c.omega},
         {"rho", c.rho},           {"s_value", c.s_value},       {"prior_lo", c.prior_lo},
         {"prior_hi", c.prior_hi}, {"oracle_draws", c.oracle_draws}, {"output", c.output},
         {"threads", c.threads}};
  return json{{"format", kConfigFormat}, {"benchmark", j}}.dump(2) + "\n";
}

}  // namespace abcbl
