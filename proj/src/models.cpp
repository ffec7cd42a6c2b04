#include "abcbl/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "abcbl/core.hpp"
#include "abcbl/errors.hpp"

namespace abcbl {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_sum_exp(const std::vector<double>& terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

// log prod_i w^{1-b_i} (1-w)^{b_i}, -inf for impossible patterns.
double log_sign_weight(std::uint32_t signs, int p, double omega) {
  const double log_w = std::log(omega);
  const double log_1mw = std::log1p(-omega);
  double acc = 0.0;
  for (int i = 0; i < p; ++i) acc += ((signs >> i) & 1U) ? log_1mw : log_w;
  return acc;
}

double sign_of(std::uint32_t signs, int i) { return ((signs >> i) & 1U) ? -1.0 : 1.0; }

}  // namespace

std::vector<std::string> Simulator::param_names() const { return default_names(param_dim()); }
std::vector<std::string> Simulator::stat_names() const { return default_names(stat_dim()); }

UniformBoxPrior::UniformBoxPrior(Eigen::Index p, double lo, double hi) : p_(p), lo_(lo), hi_(hi) {
  if (p < 1) throw ValidationError("prior dimension must be positive");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ValidationError("uniform prior needs finite lo < hi");
}

Eigen::VectorXd UniformBoxPrior::draw(Rng& rng) const {
  std::uniform_real_distribution<double> u(lo_, hi_);
  Eigen::VectorXd theta(p_);
  for (Eigen::Index i = 0; i < p_; ++i) theta[i] = u(rng);
  return theta;
}

bool UniformBoxPrior::in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return (theta.array() >= lo_).all() && (theta.array() <= hi_).all();
}

NormalPrior::NormalPrior(Eigen::Index p, double mean, double sd) : p_(p), mean_(mean), sd_(sd) {
  if (p < 1) throw ValidationError("prior dimension must be positive");
  if (!(sd > 0.0)) throw ValidationError("normal prior needs sd > 0");
}

Eigen::VectorXd NormalPrior::draw(Rng& rng) const {
  std::normal_distribution<double> z(mean_, sd_);
  Eigen::VectorXd theta(p_);
  for (Eigen::Index i = 0; i < p_; ++i) theta[i] = z(rng);
  return theta;
}

bool NormalPrior::in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const { return theta.allFinite(); }

// ---------------------------------------------------------------------------
// Mixture benchmark

void MixtureModelConfig::validate() const {
  if (p < 1) throw ValidationError("mixture: p must be at least 1");
  if (!(omega >= 0.0 && omega <= 1.0)) throw ValidationError("mixture: omega must lie in [0, 1]");
  if (!(prior_lo < prior_hi) || !std::isfinite(prior_lo) || !std::isfinite(prior_hi))
    throw ValidationError("mixture: prior bounds need prior_lo < prior_hi");
  if (!std::isfinite(rho)) throw ValidationError("mixture: rho must be finite");
  if (p >= 2 && !(rho > -1.0 / (p - 1) && rho < 1.0))
    throw ValidationError("mixture: rho must lie in (-1/(p-1), 1) for Sigma to be positive definite");
}

Eigen::MatrixXd MixtureModelConfig::covariance() const {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, rho);
  sigma.diagonal().setOnes();
  return sigma;
}

MixtureModel::MixtureModel(MixtureModelConfig config) : config_(config) {
  config_.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(config_.covariance());
  if (llt.info() != Eigen::Success) throw ValidationError("mixture: Sigma is not positive definite");
  chol_ = llt.matrixL();
  chol_inv_ = chol_.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(config_.p, config_.p));
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

Eigen::VectorXd MixtureModel::draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const {
  const int p = config_.p;
  if (theta.size() != p) throw ValidationError("mixture: theta has wrong dimension");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd mean(p);
  for (int i = 0; i < p; ++i) mean[i] = u(rng) < config_.omega ? theta[i] : -theta[i];
  Eigen::VectorXd noise(p);
  for (int i = 0; i < p; ++i) noise[i] = z(rng);
  return mean + chol_.triangularView<Eigen::Lower>() * noise;
}

std::optional<double> MixtureModel::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                                   const Eigen::Ref<const Eigen::VectorXd>& s) const {
  const int p = config_.p;
  if (p > kMaxEnumerationDim)
    throw ValidationError("mixture: exact likelihood enumerates 2^p terms; p must be at most " +
                          std::to_string(kMaxEnumerationDim));
  if (theta.size() != p || s.size() != p) throw ValidationError("mixture: dimension mismatch");
  const std::uint32_t count = 1U << p;
  std::vector<double> terms;
  terms.reserve(count);
  const double base = -0.5 * (p * kLogTwoPi + log_det_);
  Eigen::VectorXd r(p);
  for (std::uint32_t b = 0; b < count; ++b) {
    const double lw = log_sign_weight(b, p, config_.omega);
    if (!std::isfinite(lw)) continue;
    for (int i = 0; i < p; ++i) r[i] = s[i] - sign_of(b, i) * theta[i];
    const Eigen::VectorXd white = chol_inv_.triangularView<Eigen::Lower>() * r;
    terms.push_back(lw + base - 0.5 * white.squaredNorm());
  }
  return log_sum_exp(terms);
}

Eigen::VectorXd mixture_draw(const Eigen::VectorXd& theta, const MixtureModelConfig& config, Rng& rng) {
  return MixtureModel(config).draw(theta, rng);
}

double mixture_loglik(const Eigen::VectorXd& theta, const Eigen::VectorXd& s, const MixtureModelConfig& config) {
  return *MixtureModel(config).log_likelihood(theta, s);
}

double mixture_marginal_density(double theta_i, double s_i, double omega) {
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  return (1.0 - omega) * phi(s_i + theta_i) + omega * phi(s_i - theta_i);
}

// ---------------------------------------------------------------------------
// Exact posterior

MixturePosterior::MixturePosterior(const Eigen::VectorXd& s_obs, const MixtureModelConfig& config, Rng& rng)
    : config_(config), s_obs_(s_obs) {
  const MixtureModel model(config);
  const int p = config.p;
  if (p > MixtureModel::kMaxEnumerationDim)
    throw ValidationError("mixture posterior: p must be at most " + std::to_string(MixtureModel::kMaxEnumerationDim));
  if (s_obs.size() != p || !s_obs.allFinite()) throw ValidationError("mixture posterior: bad observed statistics");
  chol_ = model.cholesky_factor();
  const double lo = config.prior_lo, hi = config.prior_hi;
  const std::uint32_t count = 1U << p;

  Eigen::MatrixXd noise;  // shared across components (common random numbers)
  const bool independent = p == 1 || config.rho == 0.0;
  if (!independent) {
    std::normal_distribution<double> z(0.0, 1.0);
    noise.resize(p, kTruncationDraws);
    for (Eigen::Index j = 0; j < noise.cols(); ++j)
      for (int i = 0; i < p; ++i) noise(i, j) = z(rng);
    noise = chol_.triangularView<Eigen::Lower>() * noise;
  }

  std::vector<double> log_weights(count);
  for (std::uint32_t b = 0; b < count; ++b) {
    double log_mass = 0.0;
    if (independent) {
      for (int i = 0; i < p; ++i) {
        const double m = sign_of(b, i) * s_obs[i];
        const double mass = std_normal_cdf(hi - m) - std_normal_cdf(lo - m);
        log_mass += mass > 0.0 ? std::log(mass) : -std::numeric_limits<double>::infinity();
      }
    } else {
      Eigen::Index inside = 0;
      for (Eigen::Index j = 0; j < noise.cols(); ++j) {
        bool ok = true;
        for (int i = 0; i < p && ok; ++i) {
          const double x = sign_of(b, i) * (s_obs[i] + noise(i, j));
          ok = x >= lo && x <= hi;
        }
        inside += ok;
      }
      log_mass = inside > 0 ? std::log(static_cast<double>(inside) / static_cast<double>(noise.cols()))
                            : -std::numeric_limits<double>::infinity();
    }
    log_weights[b] = log_sign_weight(b, p, config.omega) + log_mass;
  }
  const double total = log_sum_exp(log_weights);
  if (!std::isfinite(total))
    throw NumericalError("mixture posterior: every component has numerically zero mass inside the prior box");
  weights_.resize(count);
  for (std::uint32_t b = 0; b < count; ++b) weights_[b] = std::exp(log_weights[b] - total);
}

Eigen::VectorXd MixturePosterior::component_mean(std::uint32_t signs) const {
  Eigen::VectorXd m(config_.p);
  for (int i = 0; i < config_.p; ++i) m[i] = sign_of(signs, i) * s_obs_[i];
  return m;
}

Eigen::MatrixXd MixturePosterior::component_covariance(std::uint32_t signs) const {
  Eigen::VectorXd d(config_.p);
  for (int i = 0; i < config_.p; ++i) d[i] = sign_of(signs, i);
  return d.asDiagonal() * config_.covariance() * d.asDiagonal();
}

Eigen::MatrixXd MixturePosterior::sample(Eigen::Index m, Rng& rng) const {
  if (m < 0) throw ValidationError("sample size must be non-negative");
  const int p = config_.p;
  std::vector<double> cumulative(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative.begin());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd out(m, p);
  Eigen::VectorXd noise(p), x(p);
  std::uint64_t attempts = 0;
  for (Eigen::Index row = 0; row < m; ++row) {
    const double target = u(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    const auto b = static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                       static_cast<std::ptrdiff_t>(weights_.size()) - 1));
    for (;;) {
      ++attempts;
      for (int i = 0; i < p; ++i) noise[i] = z(rng);
      const Eigen::VectorXd shifted = s_obs_ + chol_.triangularView<Eigen::Lower>() * noise;
      for (int i = 0; i < p; ++i) x[i] = sign_of(b, i) * shifted[i];
      if ((x.array() >= config_.prior_lo).all() && (x.array() <= config_.prior_hi).all()) break;
      if (attempts >= 10000 && static_cast<double>(row + 1) < kMinAcceptanceRate * static_cast<double>(attempts))
        throw NumericalError("mixture posterior: box rejection acceptance rate fell below 1e-3");
    }
    out.row(row) = x.transpose();
  }
  return out;
}

Eigen::MatrixXd exact_posterior_sample(const Eigen::VectorXd& s_obs, const MixtureModelConfig& config,
                                       Eigen::Index m, Rng& rng) {
  return MixturePosterior(s_obs, config, rng).sample(m, rng);
}

MixtureMarginalOracle::MixtureMarginalOracle(const MixturePosterior& posterior, int k)
    : k_(k), lo_(posterior.config().prior_lo), hi_(posterior.config().prior_hi) {
  const int p = posterior.config().p;
  if (k < 1 || k > 2 || k > p) throw ValidationError("marginal oracle supports 1 or 2 leading coordinates");
  const std::uint32_t groups = 1U << k;
  weight_.assign(groups, 0.0);
  for (std::uint32_t b = 0; b < posterior.component_count(); ++b) weight_[b & (groups - 1)] += posterior.component_weight(b);
  for (std::uint32_t g = 0; g < groups; ++g) {
    const Eigen::VectorXd m = posterior.component_mean(g);
    const Eigen::MatrixXd c = posterior.component_covariance(g);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
    mean.head(k) = m.head(k);
    cov.topLeftCorner(k, k) = c.topLeftCorner(k, k);
    mean_.push_back(mean);
    precision_.push_back(cov.inverse());
    log_det_.push_back(std::log(cov.topLeftCorner(k, k).determinant()));
  }

  // Midpoint-rule mass of the untruncated mixture over the box.
  const int grid = k == 2 ? 400 : 4000;
  const double h = (hi_ - lo_) / grid;
  double mass = 0.0;
  double x[2] = {0.0, 0.0};
  if (k == 1) {
    for (int i = 0; i < grid; ++i) {
      x[0] = lo_ + (i + 0.5) * h;
      mass += unnormalized_pdf(x);
    }
    mass *= h;
  } else {
    for (int i = 0; i < grid; ++i) {
      x[0] = lo_ + (i + 0.5) * h;
      for (int j = 0; j < grid; ++j) {
        x[1] = lo_ + (j + 0.5) * h;
        mass += unnormalized_pdf(x);
      }
    }
    mass *= h * h;
  }
  if (!(mass > 0.0)) throw NumericalError("marginal oracle: zero mass inside the box");
  log_norm_ = std::log(mass);
}

double MixtureMarginalOracle::unnormalized_pdf(const double* x) const {
  for (int i = 0; i < k_; ++i)
    if (x[i] < lo_ || x[i] > hi_) return 0.0;
  double total = 0.0;
  for (std::size_t g = 0; g < weight_.size(); ++g) {
    if (weight_[g] == 0.0) continue;
    Eigen::Vector2d r = Eigen::Vector2d::Zero();
    for (int i = 0; i < k_; ++i) r[i] = x[i] - mean_[g][i];
    const double q = k_ == 2 ? r.dot(precision_[g] * r) : r[0] * r[0] * precision_[g](0, 0);
    total += weight_[g] * std::exp(-0.5 * (q + k_ * kLogTwoPi + log_det_[g]));
  }
  return total;
}

double MixtureMarginalOracle::log_pdf(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != k_) throw ValidationError("marginal oracle: point has wrong dimension");
  return std::log(unnormalized_pdf(x.data())) - log_norm_;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd ConjugateGaussianModel::draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd s(p_);
  for (int i = 0; i < p_; ++i) s[i] = theta[i] + z(rng);
  return s;
}

std::optional<double> ConjugateGaussianModel::log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                                             const Eigen::Ref<const Eigen::VectorXd>& s) const {
  return -0.5 * (p_ * kLogTwoPi + (s - theta).squaredNorm());
}

}  // namespace abcbl
