#pragma once

// Regression adjustment of accepted ABC draws.
//
// Linear:         theta^a = theta^i - beta^T (s^i - s_obs)
// Heteroscedastic: theta^a = mu(s_obs) + sigma(s_obs) sigma(s^i)^{-1} (theta^i - mu(s^i))
// with diagonal sigma.

#include <Eigen/Dense>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "abcbl/core.hpp"

namespace abcbl {

inline constexpr double kDefaultRidge = 1e-8;

// Weighted least squares of Y on X with an intercept. The slope system is
// solved from the weighted covariance of X plus lambda I, where
// lambda = ridge * trace / q.
struct WlsFit {
  Eigen::VectorXd intercept;  // p
  Eigen::MatrixXd coef;       // q x p
};
WlsFit weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                              double ridge);

struct LinearFit {
  Eigen::VectorXd alpha;    // p
  Eigen::MatrixXd beta;     // d x p
  Eigen::VectorXd weights;  // weights of the accepted rows, in acceptance order
  double ridge = 0.0;
};

struct Provenance {
  std::string method;  // rejection | linear | hetero, plus "+marginal" suffixes
  std::string recipe;  // human-readable description of every stage
};

struct AdjustedSample {
  Eigen::MatrixXd values;                    // n_acc x p
  Eigen::VectorXd weights;                   // carried from the acceptance step
  std::vector<Eigen::Index> source_indices;  // rows of the reference table
  std::vector<std::string> param_names;
  Provenance provenance;
  std::vector<std::string> warnings;
  Eigen::Index out_of_support = 0;  // set by flag_out_of_support
};

// Accepted rows, unmodified.
AdjustedSample rejection_sample(const ReferenceTable& table, const AcceptanceResult& acceptance);

LinearFit fit_weighted_linear(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                              const AcceptanceResult& acceptance, double ridge = kDefaultRidge);

AdjustedSample linear_adjust(const ReferenceTable& table, const LinearFit& fit, const Eigen::VectorXd& s_obs,
                             const AcceptanceResult& acceptance);

// theta | s = mu(s) + sigma(s) eps, sigma diagonal.
class ConditionalRegressor {
 public:
  virtual ~ConditionalRegressor() = default;
  virtual Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& s) const = 0;
  virtual Eigen::VectorXd scale(const Eigen::Ref<const Eigen::VectorXd>& s) const = 0;
  // Lower bound applied to sigma^2, per parameter.
  virtual const Eigen::VectorXd& variance_floor() const = 0;
  virtual std::string describe() const = 0;
};

struct HeteroOptions {
  int degree = 2;               // polynomial degree of the basis in (s - s_obs): 1 or 2
  bool constant_scale = false;  // fit log sigma^2 on the intercept only
  double ridge = kDefaultRidge;
};

// Polynomial-basis regressor: mu by weighted least squares on the basis,
// log(residual^2 + floor) by weighted least squares on the same basis.
class PolynomialRegressor final : public ConditionalRegressor {
 public:
  PolynomialRegressor(Eigen::VectorXd center, int degree, WlsFit mean_fit, WlsFit log_var_fit, bool constant_scale,
                      Eigen::VectorXd floor);

  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& s) const override;
  Eigen::VectorXd scale(const Eigen::Ref<const Eigen::VectorXd>& s) const override;
  const Eigen::VectorXd& variance_floor() const override { return floor_; }
  std::string describe() const override;

  int degree() const { return degree_; }
  // Basis row (without intercept) for s.
  Eigen::RowVectorXd basis(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  static Eigen::Index basis_size(Eigen::Index d, int degree);

 private:
  Eigen::VectorXd center_;
  int degree_;
  WlsFit mean_fit_;
  WlsFit log_var_fit_;
  bool constant_scale_;
  Eigen::VectorXd floor_;
};

struct HeteroFit {
  std::shared_ptr<const ConditionalRegressor> regressor;
  std::vector<std::string> warnings;  // e.g. degree fallback
};

// Falls back to degree 1 (with a warning) when the degree-2 basis is singular.
HeteroFit fit_heteroscedastic(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                              const AcceptanceResult& acceptance, const HeteroOptions& options = {});

// Warns when sigma(s^i) sits at the variance floor for more than 1% of rows.
AdjustedSample hetero_adjust(const ReferenceTable& table, const ConditionalRegressor& regressor,
                             const Eigen::VectorXd& s_obs, const AcceptanceResult& acceptance);

// Counts rows outside the prior support and records a warning; values are
// never clipped.
void flag_out_of_support(AdjustedSample& sample, const Prior& prior);

enum class Adjustment { none, linear, hetero };

// "rejection" (or "none"), "linear", "hetero".
std::string_view to_string(Adjustment a);
Adjustment parse_adjustment(std::string_view name);

struct AdjustOptions {
  double ridge = kDefaultRidge;
  HeteroOptions hetero;
};

// Fits and applies the requested adjustment to the accepted rows.
AdjustedSample adjust(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const AcceptanceResult& acceptance,
                      Adjustment kind, const AdjustOptions& options = {});

inline constexpr const char* kSampleFormat = "abcbl-sample v1";
inline constexpr const char* kSampleMetaFormat = "abcbl-sample-meta v1";

// Same delimited layout as the parameter block of a reference table, with a
// provenance sidecar.
void write_sample(const std::filesystem::path& path, const AdjustedSample& sample);
AdjustedSample read_sample(const std::filesystem::path& path);

}  // namespace abcbl
