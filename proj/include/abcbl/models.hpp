#pragma once

// Model registry and the Gaussian-mixture benchmark.
//
// The benchmark likelihood is a 2^p-component mixture
//   p(s | theta) = sum_b prod_i w^{1-b_i} (1-w)^{b_i} N_p(s; D_b theta, Sigma)
// with D_b = diag(1 - 2 b) and Sigma equicorrelated. Because
// N_p(s; D_b theta, Sigma) = N_p(theta; D_b s, D_b Sigma D_b), the posterior
// under a uniform box prior is a truncated Gaussian mixture in theta, which
// gives an exact sampling oracle.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "abcbl/model_interface.hpp"
#include "abcbl/rng.hpp"

namespace abcbl {

struct MixtureModelConfig {
  int p = 1;
  double omega = 0.3;
  double rho = 0.7;
  double prior_lo = -20.0;
  double prior_hi = 40.0;

  // Throws ValidationError unless Sigma is positive definite and lo < hi.
  void validate() const;
  Eigen::MatrixXd covariance() const;
};

class MixtureModel final : public Simulator {
 public:
  static constexpr int kMaxEnumerationDim = 20;

  explicit MixtureModel(MixtureModelConfig config);

  std::string id() const override { return "mixture"; }
  Eigen::Index param_dim() const override { return config_.p; }
  Eigen::Index stat_dim() const override { return config_.p; }
  Eigen::VectorXd draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const override;
  std::optional<double> log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                       const Eigen::Ref<const Eigen::VectorXd>& s) const override;

  const MixtureModelConfig& config() const { return config_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_; }
  UniformBoxPrior prior() const { return {config_.p, config_.prior_lo, config_.prior_hi}; }

 private:
  MixtureModelConfig config_;
  Eigen::MatrixXd chol_;  // lower-triangular L with L L^T = Sigma
  Eigen::MatrixXd chol_inv_;
  double log_det_ = 0.0;
};

// s ~ mixture(theta). Equivalent to MixtureModel(config).draw(theta, rng).
Eigen::VectorXd mixture_draw(const Eigen::VectorXd& theta, const MixtureModelConfig& config, Rng& rng);

// Exact log p(s | theta) by log-sum-exp over all 2^p sign patterns.
double mixture_loglik(const Eigen::VectorXd& theta, const Eigen::VectorXd& s, const MixtureModelConfig& config);

// Marginal density of one statistic: (1-w) N(s; -theta, 1) + w N(s; theta, 1).
double mixture_marginal_density(double theta_i, double s_i, double omega);

// Posterior p(theta | s_obs) under the uniform box prior, as a mixture of
// truncated Gaussians N(D_b s_obs, D_b Sigma D_b) restricted to the box.
class MixturePosterior {
 public:
  static constexpr int kTruncationDraws = 10000;
  static constexpr double kMinAcceptanceRate = 1e-3;

  // Truncation masses are exact products of univariate box probabilities when
  // rho = 0 and Monte Carlo estimates (kTruncationDraws each) otherwise.
  MixturePosterior(const Eigen::VectorXd& s_obs, const MixtureModelConfig& config, Rng& rng);

  // m x p matrix of exact posterior draws (rejection against the box).
  Eigen::MatrixXd sample(Eigen::Index m, Rng& rng) const;

  std::size_t component_count() const { return weights_.size(); }
  // Normalized posterior probability of sign pattern b (bit i = b_{i+1}).
  double component_weight(std::uint32_t signs) const { return weights_[signs]; }
  Eigen::VectorXd component_mean(std::uint32_t signs) const;
  Eigen::MatrixXd component_covariance(std::uint32_t signs) const;
  const MixtureModelConfig& config() const { return config_; }

 private:
  MixtureModelConfig config_;
  Eigen::VectorXd s_obs_;
  Eigen::MatrixXd chol_;
  std::vector<double> weights_;
};

Eigen::MatrixXd exact_posterior_sample(const Eigen::VectorXd& s_obs, const MixtureModelConfig& config,
                                       Eigen::Index m, Rng& rng);

// Exact density of the first k (1 or 2) coordinates of the benchmark
// posterior. Components are marginalized by dropping coordinates, then the
// density is renormalized over the box by midpoint quadrature (400 x 400 for
// k = 2, 4000 points for k = 1).
class MixtureMarginalOracle {
 public:
  MixtureMarginalOracle(const MixturePosterior& posterior, int k);

  int dims() const { return k_; }
  double log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double log_normalizer() const { return log_norm_; }

 private:
  double unnormalized_pdf(const double* x) const;

  int k_;
  double lo_, hi_;
  std::vector<double> weight_;
  std::vector<Eigen::Vector2d> mean_;
  std::vector<Eigen::Matrix2d> precision_;
  std::vector<double> log_det_;
  double log_norm_ = 0.0;
};

// theta ~ N(0, 1)^p, s = theta + N(0, I). Posterior mean s/2, variance 1/2.
class ConjugateGaussianModel final : public Simulator {
 public:
  explicit ConjugateGaussianModel(int p) : p_(p) {}
  std::string id() const override { return "conjugate"; }
  Eigen::Index param_dim() const override { return p_; }
  Eigen::Index stat_dim() const override { return p_; }
  Eigen::VectorXd draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const override;
  std::optional<double> log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                       const Eigen::Ref<const Eigen::VectorXd>& s) const override;

 private:
  int p_;
};

// Runs an external executable once per draw: theta is written to its standard
// input as one line of space-separated decimals, and it must print d decimal
// numbers on standard output. The draw's seed is passed in the environment
// variable ABCBL_SEED. A non-zero exit status counts as a failed draw.
class ExternalSimulator final : public Simulator {
 public:
  ExternalSimulator(std::string command, int p, int d);
  std::string id() const override { return "external"; }
  Eigen::Index param_dim() const override { return p_; }
  Eigen::Index stat_dim() const override { return d_; }
  Eigen::VectorXd draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const override;

 private:
  std::string command_;
  int p_, d_;
};

}  // namespace abcbl
