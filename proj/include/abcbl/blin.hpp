#pragma once

// Monte Carlo Bayes linear analysis:
//   E_s(theta)   = E(theta) + Cov(theta, s) Var(s)^{-1} (s - E(s))
//   Var_s(theta) = Var(theta) - Cov(theta, s) Var(s)^{-1} Cov(s, theta)
// with moments estimated from a reference table.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "abcbl/core.hpp"

namespace abcbl {

struct MomentEstimate {
  Eigen::VectorXd mean_theta;   // p
  Eigen::VectorXd mean_s;       // d
  Eigen::MatrixXd var_theta;    // p x p
  Eigen::MatrixXd var_s;        // d x d, after shrinkage
  Eigen::MatrixXd cov_theta_s;  // p x d
  Eigen::Index n_used = 0;
  double shrinkage = 0.0;
};

struct BayesLinearSummary {
  Eigen::VectorXd adjusted_mean;
  Eigen::MatrixXd adjusted_var;
  Eigen::VectorXd s_obs;
  std::vector<std::string> param_names;
};

// Sample moments with divisor n-1. With observation weights w the divisor is
// sum(w) - sum(w^2)/sum(w), which reduces to n-1 for equal weights; passing
// kernel weights gives the kernel-weighted Bayes linear variant. var_s is
// shrunk towards its diagonal: (1-lambda) S + lambda diag(S).
MomentEstimate estimate_moments(const ReferenceTable& table, double shrinkage = 0.0,
                                const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// Weighted mean and covariance of the rows of `values` (same divisor rule).
struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
SampleMoments sample_moments(const Eigen::MatrixXd& values,
                             const std::optional<Eigen::VectorXd>& weights = std::nullopt);

Eigen::VectorXd adjusted_expectation(const MomentEstimate& m, const Eigen::VectorXd& s_obs);
Eigen::MatrixXd adjusted_variance(const MomentEstimate& m);
BayesLinearSummary bayes_linear_summary(const MomentEstimate& m, const Eigen::VectorXd& s_obs,
                                        std::vector<std::string> param_names);

// Key-value report: means, standard deviations and the correlation matrix.
std::string format_summary(const BayesLinearSummary& summary);

struct VarianceInequalityReport {
  Eigen::MatrixXd adjusted_var;          // Var_s(theta) from the draws' moments
  Eigen::MatrixXd mean_conditional_var;  // Monte Carlo E[Var(theta | s)]
  double min_eigenvalue = 0.0;           // of adjusted_var - mean_conditional_var
  double standard_error = 0.0;           // batch-means SE of that eigenvalue
  double equality_gap = 0.0;             // max |adjusted_var - mean_conditional_var|
  Eigen::Index draws = 0;
};

using ConditionalVarianceFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& s)>;

// `draws` is a prior-predictive reference table. Var_s(theta) comes from its
// moments; E[Var(theta|s)] averages the oracle over its statistics. The
// standard error uses `batches` contiguous batches so that it covers the
// sampling error of both terms.
VarianceInequalityReport variance_inequality_check(const ReferenceTable& draws,
                                                   const ConditionalVarianceFn& posterior_var, int batches = 20,
                                                   unsigned threads = 1);

// Per-parameter linear projection of theta on s, usable as low-dimensional
// summary statistics for a marginal analysis.
struct SemiAutoProjection {
  Eigen::VectorXd intercept;  // p
  Eigen::MatrixXd coef;       // d x p
  std::vector<Eigen::Index> stat_columns;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& s_subset) const;
};

SemiAutoProjection fit_semi_automatic(const ReferenceTable& table, std::vector<Eigen::Index> stat_columns = {},
                                      double ridge = 1e-8);
// n x p matrix: row i is the projection of s^i.
Eigen::MatrixXd semi_automatic_statistics(const ReferenceTable& table, double ridge = 1e-8);
Eigen::MatrixXd project_statistics(const ReferenceTable& table, const SemiAutoProjection& projection);

}  // namespace abcbl
