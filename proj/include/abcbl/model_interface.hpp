#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "abcbl/rng.hpp"

namespace abcbl {

class Prior {
 public:
  virtual ~Prior() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::VectorXd draw(Rng& rng) const = 0;
  virtual bool in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const = 0;
};

// Summary-statistic simulator. draw() may throw or return non-finite values to
// signal a failed simulation; the table builder retries those.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::string id() const = 0;
  virtual Eigen::Index param_dim() const = 0;
  virtual Eigen::Index stat_dim() const = 0;
  virtual Eigen::VectorXd draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const = 0;
  // Exact log p(s | theta) when the model has a tractable likelihood.
  virtual std::optional<double> log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& /*theta*/,
                                               const Eigen::Ref<const Eigen::VectorXd>& /*s*/) const {
    return std::nullopt;
  }
  virtual std::vector<std::string> param_names() const;
  virtual std::vector<std::string> stat_names() const;
};

class UniformBoxPrior final : public Prior {
 public:
  UniformBoxPrior(Eigen::Index p, double lo, double hi);
  Eigen::Index dim() const override { return p_; }
  Eigen::VectorXd draw(Rng& rng) const override;
  bool in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  Eigen::Index p_;
  double lo_, hi_;
};

// Independent N(mean, sd^2) in every coordinate.
class NormalPrior final : public Prior {
 public:
  NormalPrior(Eigen::Index p, double mean, double sd);
  Eigen::Index dim() const override { return p_; }
  Eigen::VectorXd draw(Rng& rng) const override;
  bool in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;

 private:
  Eigen::Index p_;
  double mean_, sd_;
};

class PointMassPrior final : public Prior {
 public:
  explicit PointMassPrior(Eigen::VectorXd value) : value_(std::move(value)) {}
  Eigen::Index dim() const override { return value_.size(); }
  Eigen::VectorXd draw(Rng&) const override { return value_; }
  bool in_support(const Eigen::Ref<const Eigen::VectorXd>& theta) const override { return theta == value_; }

 private:
  Eigen::VectorXd value_;
};

}  // namespace abcbl
