#pragma once

// Marginal adjustment of a joint ABC sample.
//
// 1. Build a joint (regression-adjusted) sample from the full statistic set.
// 2. For each selected parameter j, run a separate low-dimensional ABC
//    analysis on statistics informative for theta_j and keep column j.
// 3. Resample that marginal to the joint sample size when sizes differ, then
//    overwrite column j of the joint sample by order statistics: the row
//    holding the i-th smallest joint value receives the i-th smallest
//    marginal value. Ranks, hence the dependence structure, are unchanged.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "abcbl/core.hpp"
#include "abcbl/regress.hpp"

namespace abcbl {

struct MarginalSpec {
  Eigen::Index param = 0;
  std::vector<Eigen::Index> stats;  // statistic columns informative for theta_param
  Eigen::Index keep = 0;
  Adjustment adjustment = Adjustment::none;
  // Use the linear projection of theta_param on `stats` as a single statistic.
  bool semi_automatic = false;

  std::string describe() const;
};

struct MarginalSample {
  std::vector<double> values;  // ascending
  MarginalSpec spec;
  Eigen::Index source_size = 0;  // draws before any resampling
  Eigen::Index m() const { return static_cast<Eigen::Index>(values.size()); }
};

struct JointConfig {
  Eigen::Index keep = 0;
  KernelKind kernel = KernelKind::uniform;
  Adjustment adjustment = Adjustment::linear;
  AdjustOptions options;
  unsigned threads = 1;
};

// The joint ABC run on every statistic.
AdjustedSample joint_sample(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const JointConfig& config);

// ABC on the spec's statistic subset (rescaled on the subset) with the spec's
// keep and adjustment; kernel and ridge come from `settings`.
MarginalSample estimate_marginal(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const MarginalSpec& spec,
                                 const JointConfig& settings = {});

// Quantiles at (i - 0.5) / n_target of a Gaussian KDE fitted to the marginal,
// by bisection on the KDE distribution function. `bandwidth` overrides the
// Silverman rule. A constant sample is returned as n_target copies.
MarginalSample resample_to_n(const MarginalSample& marginal, Eigen::Index n_target,
                             std::optional<double> bandwidth = std::nullopt, unsigned threads = 1);

// Replaces column params[k] of `joint` by marginals[k] via order statistics,
// ties in the joint column broken by row index.
AdjustedSample order_statistic_replace(const AdjustedSample& joint, const std::vector<MarginalSample>& marginals,
                                       const std::vector<Eigen::Index>& params);

struct MarginalAdjustResult {
  AdjustedSample sample;
  AdjustedSample joint;
  std::vector<MarginalSample> marginals;  // resampled to the joint size, in spec order
};

// Full pipeline on a single reference table. Marginal analyses run
// concurrently on up to config.threads threads; results do not depend on it.
MarginalAdjustResult marginal_adjust_pipeline(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                                              const JointConfig& config, const std::vector<MarginalSpec>& specs);

}  // namespace abcbl
