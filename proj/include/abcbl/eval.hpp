#pragma once

// Accuracy diagnostics: product-Gaussian kernel density estimates, Monte
// Carlo Kullback-Leibler divergence against an exact density, Kolmogorov-
// Smirnov distances and moment comparisons.

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace abcbl {

// 1.06 * min(sd, IQR/1.349) * m^{-1/5}. The IQR term is ignored when the IQR
// is zero, so only a constant sample has zero bandwidth.
double silverman_bandwidth(std::span<const double> values);

// Empirical quantile with linear interpolation between order statistics
// (sorted input).
double sorted_quantile(std::span<const double> sorted, double prob);

class KdeModel {
 public:
  KdeModel(Eigen::MatrixXd points, Eigen::VectorXd bandwidths);

  Eigen::Index dims() const { return points_.cols(); }
  Eigen::Index size() const { return points_.rows(); }
  const Eigen::VectorXd& bandwidths() const { return bandwidths_; }
  const Eigen::MatrixXd& points() const { return points_; }

  double density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Distribution function; one-dimensional models only.
  double cdf(double x) const;

 private:
  Eigen::MatrixXd points_;  // m x k, column-major for the SIMD kernel
  Eigen::VectorXd bandwidths_;
  Eigen::VectorXd inv_bandwidths_;
  double norm_ = 0.0;
};

// Silverman bandwidth per dimension. Throws for m < 2, k outside {1, 2}, or a
// dimension with zero spread.
KdeModel fit_kde(const Eigen::MatrixXd& points);

struct KlReport {
  double estimate = 0.0;
  double standard_error = 0.0;
  Eigen::Index n_oracle = 0;
  Eigen::Index dims = 0;
  Eigen::Index floor_hits = 0;
};

inline constexpr double kKdeDensityFloor = 1e-300;

using LogPdf = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

// mean over oracle draws of [log p(x) - log q(x)], q the KDE of `abc_sample`.
KlReport kl_divergence(const Eigen::MatrixXd& oracle_draws, const LogPdf& oracle_logpdf,
                       const Eigen::MatrixXd& abc_sample, unsigned threads = 1);
KlReport kl_divergence(const Eigen::MatrixXd& oracle_draws, const LogPdf& oracle_logpdf, const KdeModel& q,
                       unsigned threads = 1);

// Two-sample sup-norm distance between empirical distribution functions.
double ks_distance(std::span<const double> a, std::span<const double> b);
// One-sample distance to an exact distribution function.
double ks_distance(std::span<const double> a, const std::function<double(double)>& cdf);

struct MomentReport {
  Eigen::VectorXd mean_diff;  // sample - reference
  Eigen::VectorXd sd_diff;
  double max_abs = 0.0;
  double max_rel = 0.0;  // relative to max(|reference|, tiny)
};

MomentReport moment_report(const Eigen::MatrixXd& sample, const Eigen::VectorXd& ref_mean,
                           const Eigen::MatrixXd& ref_var);
std::string format_moment_report(const MomentReport& report, const std::vector<std::string>& param_names);

}  // namespace abcbl
