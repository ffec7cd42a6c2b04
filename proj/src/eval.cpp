#include "abcbl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "abcbl/errors.hpp"
#include "abcbl/parallel.hpp"
#include "abcbl/simd/kernels.hpp"
#include "abcbl/table_io.hpp"

namespace abcbl {

double sorted_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m < 2) throw ValidationError("bandwidth needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
  return 1.06 * spread * std::pow(static_cast<double>(m), -0.2);
}

KdeModel::KdeModel(Eigen::MatrixXd points, Eigen::VectorXd bandwidths)
    : points_(std::move(points)), bandwidths_(std::move(bandwidths)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw ValidationError("KDE needs at least one point");
  if (bandwidths_.size() != points_.cols() || !(bandwidths_.array() > 0.0).all())
    throw ValidationError("KDE bandwidths must be positive, one per dimension");
  inv_bandwidths_ = bandwidths_.cwiseInverse();
  norm_ = 1.0 / static_cast<double>(points_.rows());
  for (Eigen::Index k = 0; k < bandwidths_.size(); ++k) norm_ /= bandwidths_[k] * std::sqrt(2.0 * std::numbers::pi);
}

double KdeModel::density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dims()) throw ValidationError("KDE evaluation point has wrong dimension");
  std::vector<const double*> cols;
  for (Eigen::Index k = 0; k < dims(); ++k) cols.push_back(points_.col(k).data());
  const Eigen::VectorXd q = x;
  const double sum = simd::gaussian_kernel_sum(cols, static_cast<std::size_t>(points_.rows()),
                                               {q.data(), static_cast<std::size_t>(q.size())},
                                               {inv_bandwidths_.data(), static_cast<std::size_t>(dims())});
  return norm_ * sum;
}

double KdeModel::cdf(double x) const {
  if (dims() != 1) throw ValidationError("KDE distribution function needs a one-dimensional model");
  double acc = 0.0;
  const double h = bandwidths_[0];
  for (Eigen::Index i = 0; i < points_.rows(); ++i)
    acc += 0.5 * std::erfc(-(x - points_(i, 0)) / (h * std::numbers::sqrt2));
  return acc / static_cast<double>(points_.rows());
}

KdeModel fit_kde(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) throw ValidationError("KDE needs at least 2 points");
  if (points.cols() < 1 || points.cols() > 2) throw ValidationError("KDE supports 1 or 2 dimensions");
  Eigen::VectorXd h(points.cols());
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    h[k] = silverman_bandwidth({points.col(k).data(), static_cast<std::size_t>(points.rows())});
    if (!(h[k] > 0.0))
      throw ValidationError("KDE: dimension " + std::to_string(k + 1) + " has zero spread (degenerate sample)");
  }
  return KdeModel(points, h);
}

KlReport kl_divergence(const Eigen::MatrixXd& oracle_draws, const LogPdf& oracle_logpdf, const KdeModel& q,
                       unsigned threads) {
  const Eigen::Index m = oracle_draws.rows();
  if (m < 2) throw ValidationError("KL needs at least 2 oracle draws");
  if (oracle_draws.cols() != q.dims()) throw ValidationError("KL: oracle and sample dimensions differ");
  std::vector<double> terms(static_cast<std::size_t>(m));
  std::vector<char> floored(static_cast<std::size_t>(m), 0);
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::VectorXd x = oracle_draws.row(static_cast<Eigen::Index>(i)).transpose();
      double dens = q.density(x);
      if (!(dens >= kKdeDensityFloor)) {
        dens = kKdeDensityFloor;
        floored[i] = 1;
      }
      terms[i] = oracle_logpdf(x) - std::log(dens);
    }
  });
  KlReport r;
  r.n_oracle = m;
  r.dims = q.dims();
  double sum = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!std::isfinite(terms[i]))
      throw NumericalError("KL: non-finite term at oracle draw " + std::to_string(i + 1));
    sum += terms[i];
    r.floor_hits += floored[i];
  }
  r.estimate = sum / static_cast<double>(m);
  double ss = 0.0;
  for (double t : terms) ss += (t - r.estimate) * (t - r.estimate);
  r.standard_error = std::sqrt(ss / static_cast<double>(m - 1)) / std::sqrt(static_cast<double>(m));
  return r;
}

KlReport kl_divergence(const Eigen::MatrixXd& oracle_draws, const LogPdf& oracle_logpdf,
                       const Eigen::MatrixXd& abc_sample, unsigned threads) {
  return kl_divergence(oracle_draws, oracle_logpdf, fit_kde(abc_sample), threads);
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("KS distance needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j]))
      v = x[i];
    else
      v = y[j];
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return best;
}

double ks_distance(std::span<const double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw ValidationError("KS distance needs a nonempty sample");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    best = std::max({best, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return best;
}

MomentReport moment_report(const Eigen::MatrixXd& sample, const Eigen::VectorXd& ref_mean,
                           const Eigen::MatrixXd& ref_var) {
  const Eigen::Index p = sample.cols();
  if (ref_mean.size() != p || ref_var.rows() != p || ref_var.cols() != p)
    throw ValidationError("moment report: dimensions disagree");
  if (sample.rows() < 2) throw ValidationError("moment report needs at least 2 rows");
  const Eigen::VectorXd mean = sample.colwise().mean().transpose();
  const Eigen::MatrixXd centered = sample.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(sample.rows() - 1);
  MomentReport r;
  r.mean_diff = mean - ref_mean;
  r.sd_diff = cov.diagonal().cwiseSqrt() - ref_var.diagonal().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd cov_diff = cov - ref_var;
  r.max_abs = std::max(r.mean_diff.cwiseAbs().maxCoeff(), cov_diff.cwiseAbs().maxCoeff());
  // Mean errors are measured against the larger of the reference location and
  // spread; covariance errors against the largest reference entry.
  const double tiny = std::numeric_limits<double>::min();
  const double mean_scale =
      std::max({ref_mean.cwiseAbs().maxCoeff(), std::sqrt(ref_var.diagonal().cwiseAbs().maxCoeff()), tiny});
  const double cov_scale = std::max(ref_var.cwiseAbs().maxCoeff(), tiny);
  r.max_rel = std::max(r.mean_diff.cwiseAbs().maxCoeff() / mean_scale, cov_diff.cwiseAbs().maxCoeff() / cov_scale);
  return r;
}

std::string format_moment_report(const MomentReport& report, const std::vector<std::string>& param_names) {
  KeyValues kv{{"format", "abcbl-moments v1"}};
  for (Eigen::Index i = 0; i < report.mean_diff.size(); ++i) {
    const std::string name = static_cast<std::size_t>(i) < param_names.size() ? param_names[i] : std::to_string(i + 1);
    kv.emplace_back("mean_diff.theta_" + name, format_double(report.mean_diff[i]));
    kv.emplace_back("sd_diff.theta_" + name, format_double(report.sd_diff[i]));
  }
  kv.emplace_back("max_abs", format_double(report.max_abs));
  kv.emplace_back("max_rel", format_double(report.max_rel));
  return key_values_to_text(kv);
}

}  // namespace abcbl
