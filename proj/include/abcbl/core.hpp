#pragma once

// Reference tables, scaled distances, kernel weighting and nearest-k
// acceptance. Shared by every ABC variant in the library.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abcbl/model_interface.hpp"

namespace abcbl {

// n joint draws (theta^i, s^i) from prior x simulator.
struct ReferenceTable {
  Eigen::MatrixXd params;  // n x p, row i is theta^i
  Eigen::MatrixXd stats;   // n x d, row i is s^i
  std::uint64_t seed = 0;
  std::string model_id;
  std::vector<std::string> param_names;
  std::vector<std::string> stat_names;

  Eigen::Index rows() const { return params.rows(); }
  Eigen::Index p() const { return params.cols(); }
  Eigen::Index d() const { return stats.cols(); }

  // Throws ValidationError on mismatched rows, n < 2, non-finite entries,
  // missing or duplicate labels.
  void validate() const;
};

std::vector<std::string> default_names(Eigen::Index count);

struct DistanceScale {
  Eigen::VectorXd factors;  // strictly positive, one per statistic
};

enum class KernelKind { uniform, epanechnikov, gaussian };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

struct Kernel {
  KernelKind kind = KernelKind::uniform;
  double epsilon = 1.0;
};

struct Threshold {
  double epsilon = 0.0;
  std::vector<Eigen::Index> accepted;  // ascending row indices
};

struct AcceptanceResult {
  Eigen::VectorXd distances;
  Eigen::VectorXd weights;             // zero outside `accepted`
  std::vector<Eigen::Index> accepted;  // ascending row indices
  double epsilon = 0.0;
};

struct BuildOptions {
  unsigned threads = 1;
  int retry_limit = 10;
};

// Row i draws theta from the substream (seed, i, 0) and simulates from
// (seed, i, attempt + 1), so the result is independent of `threads`.
ReferenceTable build_reference_table(const Simulator& simulator, const Prior& prior, Eigen::Index n,
                                     std::uint64_t seed, const BuildOptions& options = {});

// Median absolute deviation per column, falling back to the standard
// deviation and then to 1 for constant columns.
DistanceScale compute_scale(const ReferenceTable& table);
DistanceScale compute_scale(const Eigen::MatrixXd& stats, std::span<const std::string> names = {});

Eigen::VectorXd distances(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const DistanceScale& scale);
// Distances restricted to a subset of statistic columns.
Eigen::VectorXd distances(const Eigen::MatrixXd& stats, std::span<const Eigen::Index> columns,
                          const Eigen::VectorXd& s_obs_subset, const DistanceScale& scale_subset);

// epsilon is the keep-th smallest distance; ties are broken by row index so
// exactly `keep` rows are accepted.
Threshold select_epsilon(const Eigen::VectorXd& distances, Eigen::Index keep);

// Unnormalized kernel weights: uniform 1{d<=eps}, Epanechnikov
// (1-(d/eps)^2)_+, Gaussian exp(-(d/eps)^2/2).
Eigen::VectorXd kernel_weights(const Eigen::VectorXd& distances, const Kernel& kernel);

// select_epsilon followed by kernel_weights, with weights zeroed outside the
// selected set. Rows whose kernel weight is zero (the boundary row of an
// Epanechnikov kernel) are dropped from `accepted`.
AcceptanceResult accept(Eigen::VectorXd distances, Eigen::Index keep, KernelKind kind);

}  // namespace abcbl
