#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "abcbl/core.hpp"

namespace abcbl::test {

inline ReferenceTable make_table(Eigen::MatrixXd params, Eigen::MatrixXd stats) {
  ReferenceTable t;
  t.params = std::move(params);
  t.stats = std::move(stats);
  t.param_names = default_names(t.params.cols());
  t.stat_names = default_names(t.stats.cols());
  t.model_id = "test";
  return t;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::span<const double> span_of(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline AcceptanceResult accept_all(const ReferenceTable& t) {
  AcceptanceResult a;
  a.distances = Eigen::VectorXd::Zero(t.rows());
  a.weights = Eigen::VectorXd::Ones(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) a.accepted.push_back(i);
  a.epsilon = 1.0;
  return a;
}

}  // namespace abcbl::test
