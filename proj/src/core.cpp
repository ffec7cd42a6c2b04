#include "abcbl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "abcbl/errors.hpp"
#include "abcbl/parallel.hpp"
#include "abcbl/simd/kernels.hpp"

namespace abcbl {

namespace {

void check_labels(const std::vector<std::string>& names, Eigen::Index expected, const char* what) {
  if (static_cast<Eigen::Index>(names.size()) != expected)
    throw ValidationError(std::string(what) + " labels: expected " + std::to_string(expected) + ", got " +
                          std::to_string(names.size()));
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ValidationError(std::string("empty ") + what + " label");
    if (!seen.insert(n).second) throw ValidationError(std::string("duplicate ") + what + " label '" + n + "'");
  }
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

void ReferenceTable::validate() const {
  if (params.rows() != stats.rows())
    throw ValidationError("reference table: params has " + std::to_string(params.rows()) + " rows but stats has " +
                          std::to_string(stats.rows()));
  if (rows() < 2) throw ValidationError("reference table needs at least 2 rows");
  if (p() < 1 || d() < 1) throw ValidationError("reference table needs at least one parameter and one statistic");
  if (!params.allFinite()) throw ValidationError("reference table: non-finite parameter value");
  if (!stats.allFinite()) throw ValidationError("reference table: non-finite statistic value");
  check_labels(param_names, p(), "parameter");
  check_labels(stat_names, d(), "statistic");
}

std::vector<std::string> default_names(Eigen::Index count) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < count; ++i) names.push_back(std::to_string(i + 1));
  return names;
}

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::uniform:
      return "uniform";
    case KernelKind::epanechnikov:
      return "epanechnikov";
    case KernelKind::gaussian:
      return "gaussian";
  }
  return "uniform";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "uniform") return KernelKind::uniform;
  if (name == "epanechnikov") return KernelKind::epanechnikov;
  if (name == "gaussian") return KernelKind::gaussian;
  throw ValidationError("unknown kernel '" + std::string(name) + "'");
}

ReferenceTable build_reference_table(const Simulator& simulator, const Prior& prior, Eigen::Index n,
                                     std::uint64_t seed, const BuildOptions& options) {
  if (n < 2) throw ValidationError("reference table size must be at least 2, got " + std::to_string(n));
  if (prior.dim() != simulator.param_dim())
    throw ValidationError("prior dimension " + std::to_string(prior.dim()) + " does not match simulator dimension " +
                          std::to_string(simulator.param_dim()));
  if (options.retry_limit < 1) throw ValidationError("retry limit must be positive");

  const Eigen::Index p = simulator.param_dim();
  const Eigen::Index d = simulator.stat_dim();
  ReferenceTable table;
  table.params.resize(n, p);
  table.stats.resize(n, d);
  table.seed = seed;
  table.model_id = simulator.id();
  table.param_names = simulator.param_names();
  table.stat_names = simulator.stat_names();

  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      Rng theta_rng = make_stream(seed, {row, 0});
      const Eigen::VectorXd theta = prior.draw(theta_rng);
      std::string last_error = "non-finite or wrongly sized output";
      bool ok = false;
      for (int attempt = 0; attempt < options.retry_limit && !ok; ++attempt) {
        Rng sim_rng = make_stream(seed, {row, static_cast<std::uint64_t>(attempt) + 1});
        try {
          Eigen::VectorXd s = simulator.draw(theta, sim_rng);
          if (s.size() == d && s.allFinite()) {
            table.stats.row(static_cast<Eigen::Index>(row)) = s.transpose();
            ok = true;
          } else {
            last_error = "non-finite or wrongly sized output";
          }
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      if (!ok)
        throw NumericalError("simulation failed " + std::to_string(options.retry_limit) + " times at theta=" +
                             format_vector(theta) + ": " + last_error);
      table.params.row(static_cast<Eigen::Index>(row)) = theta.transpose();
    }
  });
  return table;
}

DistanceScale compute_scale(const Eigen::MatrixXd& stats, std::span<const std::string> names) {
  if (stats.rows() < 2) throw ValidationError("scale estimation needs at least 2 rows");
  DistanceScale scale;
  scale.factors.resize(stats.cols());
  for (Eigen::Index k = 0; k < stats.cols(); ++k) {
    const auto col = stats.col(k);
    if (!col.allFinite()) {
      const std::string name = k < static_cast<Eigen::Index>(names.size()) ? names[k] : std::to_string(k + 1);
      throw ValidationError("statistic '" + name + "' has non-finite values");
    }
    std::vector<double> v(col.data(), col.data() + col.size());
    const double med = median_of(v);
    for (auto& x : v) x = std::abs(x - med);
    double s = median_of(std::move(v));
    if (!(s > 0.0)) {
      const double mean = col.mean();
      s = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
    }
    if (!(s > 0.0)) s = 1.0;
    scale.factors[k] = s;
  }
  return scale;
}

DistanceScale compute_scale(const ReferenceTable& table) { return compute_scale(table.stats, table.stat_names); }

Eigen::VectorXd distances(const Eigen::MatrixXd& stats, std::span<const Eigen::Index> columns,
                          const Eigen::VectorXd& s_obs_subset, const DistanceScale& scale_subset) {
  const auto k = static_cast<Eigen::Index>(columns.size());
  if (s_obs_subset.size() != k || scale_subset.factors.size() != k)
    throw ValidationError("distance: observed vector has " + std::to_string(s_obs_subset.size()) +
                          " entries, scale has " + std::to_string(scale_subset.factors.size()) + ", expected " +
                          std::to_string(k));
  if (!s_obs_subset.allFinite()) throw ValidationError("distance: observed statistics must be finite");
  if ((scale_subset.factors.array() <= 0.0).any()) throw ValidationError("distance: scale factors must be positive");
  std::vector<const double*> cols;
  for (auto c : columns) {
    if (c < 0 || c >= stats.cols()) throw ValidationError("distance: statistic index out of range");
    cols.push_back(stats.col(c).data());
  }
  Eigen::VectorXd out(stats.rows());
  simd::scaled_distances(cols, {s_obs_subset.data(), static_cast<std::size_t>(k)},
                         {scale_subset.factors.data(), static_cast<std::size_t>(k)},
                         {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Eigen::VectorXd distances(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const DistanceScale& scale) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(table.d()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  return distances(table.stats, all, s_obs, scale);
}

Threshold select_epsilon(const Eigen::VectorXd& dist, Eigen::Index keep) {
  const Eigen::Index n = dist.size();
  if (keep < 1 || keep > n)
    throw ValidationError("keep must lie in [1, " + std::to_string(n) + "], got " + std::to_string(keep));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
  std::nth_element(order.begin(), order.begin() + (keep - 1), order.end(), less);
  Threshold t;
  t.epsilon = dist[order[static_cast<std::size_t>(keep - 1)]];
  t.accepted.assign(order.begin(), order.begin() + keep);
  std::sort(t.accepted.begin(), t.accepted.end());
  return t;
}

Eigen::VectorXd kernel_weights(const Eigen::VectorXd& dist, const Kernel& kernel) {
  if (!(kernel.epsilon > 0.0) || !std::isfinite(kernel.epsilon))
    throw ValidationError("kernel bandwidth must be positive and finite");
  if (!dist.allFinite()) throw ValidationError("kernel weights: non-finite distance");
  Eigen::VectorXd w(dist.size());
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    const double u = dist[i] / kernel.epsilon;
    switch (kernel.kind) {
      case KernelKind::uniform:
        w[i] = dist[i] <= kernel.epsilon ? 1.0 : 0.0;
        break;
      case KernelKind::epanechnikov:
        w[i] = dist[i] <= kernel.epsilon ? std::max(0.0, 1.0 - u * u) : 0.0;
        break;
      case KernelKind::gaussian:
        w[i] = std::exp(-0.5 * u * u);
        break;
    }
  }
  return w;
}

AcceptanceResult accept(Eigen::VectorXd dist, Eigen::Index keep, KernelKind kind) {
  Threshold t = select_epsilon(dist, keep);
  AcceptanceResult result;
  // Exact matches can make the selected radius zero; any positive bandwidth
  // then gives every selected row the same weight.
  const double bandwidth = t.epsilon > 0.0 ? t.epsilon : std::numeric_limits<double>::min();
  const Eigen::VectorXd raw = kernel_weights(dist, Kernel{kind, bandwidth});
  result.weights = Eigen::VectorXd::Zero(dist.size());
  for (auto i : t.accepted) {
    if (raw[i] > 0.0) {
      result.weights[i] = raw[i];
      result.accepted.push_back(i);
    }
  }
  if (result.accepted.empty()) throw NumericalError("acceptance: every selected row has zero kernel weight");
  result.epsilon = t.epsilon;
  result.distances = std::move(dist);
  return result;
}

}  // namespace abcbl
