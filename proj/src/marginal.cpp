#include "abcbl/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "abcbl/blin.hpp"
#include "abcbl/errors.hpp"
#include "abcbl/eval.hpp"
#include "abcbl/parallel.hpp"

namespace abcbl {

std::string MarginalSpec::describe() const {
  std::string s = "theta[" + std::to_string(param + 1) + "] from s{";
  for (std::size_t k = 0; k < stats.size(); ++k) s += (k ? "," : "") + std::to_string(stats[k] + 1);
  s += "}";
  if (semi_automatic) s += " (projected)";
  s += ", keep=" + std::to_string(keep) + ", " + std::string(to_string(adjustment));
  return s;
}

AdjustedSample joint_sample(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const JointConfig& config) {
  if (s_obs.size() != table.d()) throw ValidationError("observed statistics have wrong dimension");
  const DistanceScale scale = compute_scale(table);
  AcceptanceResult acc = accept(distances(table, s_obs, scale), config.keep, config.kernel);
  return adjust(table, s_obs, acc, config.adjustment, config.options);
}

MarginalSample estimate_marginal(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const MarginalSpec& spec,
                                 const JointConfig& settings) {
  if (spec.param < 0 || spec.param >= table.p()) throw ValidationError("marginal spec: parameter index out of range");
  if (spec.stats.empty()) throw ValidationError("marginal spec: empty statistic subset");
  if (spec.keep < 1 || spec.keep > table.rows()) throw ValidationError("marginal spec: keep out of range");
  if (s_obs.size() != table.d()) throw ValidationError("observed statistics have wrong dimension");
  for (auto k : spec.stats)
    if (k < 0 || k >= table.d()) throw ValidationError("marginal spec: statistic index out of range");

  ReferenceTable sub;
  sub.params = table.params;
  sub.param_names = table.param_names;
  Eigen::VectorXd s_obs_sub;
  if (spec.semi_automatic) {
    const SemiAutoProjection proj = fit_semi_automatic(table, spec.stats, settings.options.ridge);
    sub.stats = project_statistics(table, proj).col(spec.param);
    Eigen::VectorXd s_sel(static_cast<Eigen::Index>(spec.stats.size()));
    for (std::size_t c = 0; c < spec.stats.size(); ++c) s_sel[static_cast<Eigen::Index>(c)] = s_obs[spec.stats[c]];
    s_obs_sub = proj.apply(s_sel).segment(spec.param, 1);
    sub.stat_names = {"proj_" + table.param_names[static_cast<std::size_t>(spec.param)]};
  } else {
    const auto q = static_cast<Eigen::Index>(spec.stats.size());
    sub.stats.resize(table.rows(), q);
    s_obs_sub.resize(q);
    for (Eigen::Index c = 0; c < q; ++c) {
      const auto k = spec.stats[static_cast<std::size_t>(c)];
      sub.stats.col(c) = table.stats.col(k);
      s_obs_sub[c] = s_obs[k];
      sub.stat_names.push_back(table.stat_names[static_cast<std::size_t>(k)]);
    }
  }

  const DistanceScale scale = compute_scale(sub);
  const AcceptanceResult acc = accept(distances(sub, s_obs_sub, scale), spec.keep, settings.kernel);
  const AdjustedSample adjusted = adjust(sub, s_obs_sub, acc, spec.adjustment, settings.options);

  MarginalSample out;
  out.spec = spec;
  const auto col = adjusted.values.col(spec.param);
  out.values.assign(col.data(), col.data() + col.size());
  std::sort(out.values.begin(), out.values.end());
  out.source_size = out.m();
  return out;
}

MarginalSample resample_to_n(const MarginalSample& marginal, Eigen::Index n_target, std::optional<double> bandwidth,
                             unsigned threads) {
  if (marginal.m() < 2) throw ValidationError("resampling needs at least 2 marginal draws");
  if (n_target < 1) throw ValidationError("resampling target must be positive");
  const auto& x = marginal.values;
  const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
  const double lo_v = *mn_it, hi_v = *mx_it;

  MarginalSample out;
  out.spec = marginal.spec;
  out.source_size = marginal.source_size;
  if (lo_v == hi_v) {
    out.values.assign(static_cast<std::size_t>(n_target), lo_v);
    return out;
  }
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(x);
  if (!(h > 0.0)) throw ValidationError("resampling bandwidth must be positive");

  const double m = static_cast<double>(x.size());
  const double inv = 1.0 / (h * std::numbers::sqrt2);
  auto cdf = [&](double t) {
    double acc = 0.0;
    for (double v : x) acc += std::erfc((v - t) * inv);
    return 0.5 * acc / m;
  };
  const double lower = lo_v - 40.0 * h;
  const double upper = hi_v + 40.0 * h;
  const double tol = 1e-8 * (hi_v - lo_v);

  out.values.resize(static_cast<std::size_t>(n_target));
  // Every quantile bisects the same global bracket, so the result does not
  // depend on how rows are split across threads.
  parallel_for(static_cast<std::size_t>(n_target), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double prob = (static_cast<double>(i) + 0.5) / static_cast<double>(n_target);
      double left = lower, b = upper;
      while (b - left > tol) {
        const double mid = 0.5 * (left + b);
        if (cdf(mid) < prob)
          left = mid;
        else
          b = mid;
      }
      out.values[i] = 0.5 * (left + b);
    }
  });
  // Bisection midpoints can break monotonicity by less than tol.
  for (std::size_t i = 1; i < out.values.size(); ++i) out.values[i] = std::max(out.values[i], out.values[i - 1]);
  return out;
}

AdjustedSample order_statistic_replace(const AdjustedSample& joint, const std::vector<MarginalSample>& marginals,
                                       const std::vector<Eigen::Index>& params) {
  if (marginals.size() != params.size()) throw ValidationError("replacement: one marginal per parameter required");
  std::set<Eigen::Index> seen;
  for (auto j : params) {
    if (j < 0 || j >= joint.values.cols()) throw ValidationError("replacement: parameter index out of range");
    if (!seen.insert(j).second) throw ValidationError("replacement: parameter indices must be distinct");
  }
  const Eigen::Index n = joint.values.rows();
  AdjustedSample out = joint;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& marginal = marginals[k];
    const Eigen::Index j = params[k];
    if (marginal.m() != n)
      throw ValidationError("replacement: marginal for parameter " + std::to_string(j + 1) + " has " +
                            std::to_string(marginal.m()) + " values, joint sample has " + std::to_string(n));
    const auto col = joint.values.col(j);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return col[a] < col[b]; });
    for (Eigen::Index r = 0; r < n; ++r)
      out.values(order[static_cast<std::size_t>(r)], j) = marginal.values[static_cast<std::size_t>(r)];
  }
  return out;
}

MarginalAdjustResult marginal_adjust_pipeline(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                                              const JointConfig& config, const std::vector<MarginalSpec>& specs) {
  MarginalAdjustResult result;
  result.joint = joint_sample(table, s_obs, config);
  const Eigen::Index n = result.joint.values.rows();

  std::vector<Eigen::Index> params;
  for (const auto& s : specs) params.push_back(s.param);
  {
    std::set<Eigen::Index> distinct(params.begin(), params.end());
    if (distinct.size() != params.size()) throw ValidationError("marginal specs must name distinct parameters");
  }

  result.marginals.resize(specs.size());
  parallel_for(specs.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      MarginalSample m = estimate_marginal(table, s_obs, specs[k], config);
      result.marginals[k] = m.m() == n ? std::move(m) : resample_to_n(m, n);
    }
  });

  result.sample = order_statistic_replace(result.joint, result.marginals, params);
  result.sample.provenance.method = result.joint.provenance.method + "+marginal";
  std::string recipe = result.joint.provenance.recipe;
  for (const auto& m : result.marginals) {
    recipe += "; marginal " + m.spec.describe();
    if (m.source_size != m.m()) recipe += " (KDE-resampled from " + std::to_string(m.source_size) + ")";
  }
  result.sample.provenance.recipe = recipe;
  return result;
}

}  // namespace abcbl
