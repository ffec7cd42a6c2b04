#include "abcbl/blin.hpp"

#include <cmath>

#include "abcbl/errors.hpp"
#include "abcbl/parallel.hpp"
#include "abcbl/regress.hpp"
#include "abcbl/table_io.hpp"

namespace abcbl {

namespace {

// Solves Var(s) X = rhs with a Cholesky factorization, retrying once with a
// relative jitter of 1e-10 before giving up.
Eigen::MatrixXd solve_var_s(const Eigen::MatrixXd& var_s, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(var_s);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) return llt.solve(rhs);
  const double mean_var = var_s.trace() / static_cast<double>(var_s.rows());
  if (!(mean_var > 0.0))
    throw NumericalError("Var(s) is singular; use a shrinkage value above 0 or drop redundant statistics");
  Eigen::MatrixXd jittered = var_s;
  const double jitter = 1e-10 * mean_var;
  jittered.diagonal().array() += jitter;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw NumericalError("Var(s) is singular; use a shrinkage value above 0 or drop redundant statistics");
  return llt.solve(rhs);
}

}  // namespace

SampleMoments sample_moments(const Eigen::MatrixXd& values, const std::optional<Eigen::VectorXd>& weights) {
  const Eigen::Index n = values.rows();
  if (n < 2) throw ValidationError("moments need at least 2 rows");
  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(n);
  if (w.size() != n) throw ValidationError("weight vector has wrong length");
  if ((w.array() < 0.0).any()) throw ValidationError("weights must be non-negative");
  const double total = w.sum();
  const double divisor = total - w.squaredNorm() / total;
  if (!(total > 0.0) || !(divisor > 0.0)) throw ValidationError("weights leave no degrees of freedom");
  SampleMoments m;
  m.mean = (w.transpose() * values).transpose() / total;
  const Eigen::MatrixXd centered = values.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * w.asDiagonal() * centered / divisor;
  return m;
}

MomentEstimate estimate_moments(const ReferenceTable& table, double shrinkage,
                                const std::optional<Eigen::VectorXd>& weights) {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ValidationError("shrinkage must lie in [0, 1]");
  if (table.rows() < 2) throw ValidationError("moments need at least 2 rows");
  Eigen::MatrixXd joint(table.rows(), table.p() + table.d());
  joint << table.params, table.stats;
  const SampleMoments jm = sample_moments(joint, weights);
  const Eigen::Index p = table.p(), d = table.d();
  MomentEstimate m;
  m.mean_theta = jm.mean.head(p);
  m.mean_s = jm.mean.tail(d);
  m.var_theta = jm.cov.topLeftCorner(p, p);
  const Eigen::MatrixXd sample_var_s = jm.cov.bottomRightCorner(d, d);
  m.var_s = (1.0 - shrinkage) * sample_var_s;
  m.var_s.diagonal() = sample_var_s.diagonal();
  m.cov_theta_s = jm.cov.topRightCorner(p, d);
  m.n_used = weights ? (weights->array() > 0.0).count() : table.rows();
  m.shrinkage = shrinkage;
  return m;
}

Eigen::VectorXd adjusted_expectation(const MomentEstimate& m, const Eigen::VectorXd& s_obs) {
  if (s_obs.size() != m.mean_s.size()) throw ValidationError("observed statistics have wrong dimension");
  return m.mean_theta + m.cov_theta_s * solve_var_s(m.var_s, s_obs - m.mean_s);
}

Eigen::MatrixXd adjusted_variance(const MomentEstimate& m) {
  const Eigen::MatrixXd v = m.var_theta - m.cov_theta_s * solve_var_s(m.var_s, m.cov_theta_s.transpose());
  return 0.5 * (v + v.transpose());
}

BayesLinearSummary bayes_linear_summary(const MomentEstimate& m, const Eigen::VectorXd& s_obs,
                                        std::vector<std::string> param_names) {
  BayesLinearSummary s;
  s.adjusted_mean = adjusted_expectation(m, s_obs);
  s.adjusted_var = adjusted_variance(m);
  s.s_obs = s_obs;
  s.param_names = std::move(param_names);
  if (s.param_names.empty()) s.param_names = default_names(s.adjusted_mean.size());
  return s;
}

std::string format_summary(const BayesLinearSummary& summary) {
  KeyValues kv{{"format", "abcbl-bayes-linear v1"}, {"p", std::to_string(summary.adjusted_mean.size())}};
  const auto p = summary.adjusted_mean.size();
  for (Eigen::Index i = 0; i < summary.s_obs.size(); ++i)
    kv.emplace_back("s_obs." + std::to_string(i + 1), format_double(summary.s_obs[i]));
  const Eigen::VectorXd sd = summary.adjusted_var.diagonal().array().max(0.0).sqrt();
  for (Eigen::Index i = 0; i < p; ++i)
    kv.emplace_back("mean.theta_" + summary.param_names[i], format_double(summary.adjusted_mean[i]));
  for (Eigen::Index i = 0; i < p; ++i) kv.emplace_back("sd.theta_" + summary.param_names[i], format_double(sd[i]));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double denom = sd[i] * sd[j];
      const double corr = denom > 0.0 ? summary.adjusted_var(i, j) / denom : 0.0;
      kv.emplace_back("corr.theta_" + summary.param_names[i] + ".theta_" + summary.param_names[j],
                      format_double(corr));
    }
  return key_values_to_text(kv);
}

VarianceInequalityReport variance_inequality_check(const ReferenceTable& draws,
                                                   const ConditionalVarianceFn& posterior_var, int batches,
                                                   unsigned threads) {
  const Eigen::Index n = draws.rows();
  const Eigen::Index p = draws.p();
  if (batches < 2 || n < 2 * static_cast<Eigen::Index>(batches))
    throw ValidationError("variance check needs at least two rows per batch");
  std::vector<Eigen::MatrixXd> cond(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      cond[i] = posterior_var(draws.stats.row(static_cast<Eigen::Index>(i)).transpose());
  });

  auto block = [&](Eigen::Index begin, Eigen::Index end) {
    ReferenceTable sub;
    sub.params = draws.params.middleRows(begin, end - begin);
    sub.stats = draws.stats.middleRows(begin, end - begin);
    Eigen::MatrixXd mean_cond = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = begin; i < end; ++i) mean_cond += cond[static_cast<std::size_t>(i)];
    mean_cond /= static_cast<double>(end - begin);
    return std::pair{adjusted_variance(estimate_moments(sub)), mean_cond};
  };

  VarianceInequalityReport report;
  report.draws = n;
  std::tie(report.adjusted_var, report.mean_conditional_var) = block(0, n);
  const Eigen::MatrixXd diff = report.adjusted_var - report.mean_conditional_var;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (diff + diff.transpose()));
  report.min_eigenvalue = eig.eigenvalues()[0];
  const Eigen::VectorXd v = eig.eigenvectors().col(0);
  report.equality_gap = diff.cwiseAbs().maxCoeff();

  std::vector<double> gaps;
  const Eigen::Index per = n / batches;
  for (int b = 0; b < batches; ++b) {
    const Eigen::Index begin = b * per;
    const Eigen::Index end = b + 1 == batches ? n : begin + per;
    auto [adj, mc] = block(begin, end);
    gaps.push_back(v.dot((adj - mc) * v));
  }
  double mean = 0.0;
  for (double g : gaps) mean += g;
  mean /= static_cast<double>(gaps.size());
  double ss = 0.0;
  for (double g : gaps) ss += (g - mean) * (g - mean);
  report.standard_error = std::sqrt(ss / static_cast<double>(gaps.size() - 1) / static_cast<double>(gaps.size()));
  return report;
}

Eigen::VectorXd SemiAutoProjection::apply(const Eigen::Ref<const Eigen::VectorXd>& s_subset) const {
  return intercept + (s_subset.transpose() * coef).transpose();
}

SemiAutoProjection fit_semi_automatic(const ReferenceTable& table, std::vector<Eigen::Index> stat_columns,
                                      double ridge) {
  if (stat_columns.empty())
    for (Eigen::Index k = 0; k < table.d(); ++k) stat_columns.push_back(k);
  const auto q = static_cast<Eigen::Index>(stat_columns.size());
  if (table.rows() <= q + 2)
    throw ValidationError("semi-automatic statistics need more than d+2 rows");
  Eigen::MatrixXd x(table.rows(), q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const auto col = stat_columns[static_cast<std::size_t>(c)];
    if (col < 0 || col >= table.d()) throw ValidationError("statistic index out of range");
    x.col(c) = table.stats.col(col);
  }
  WlsFit fit = weighted_least_squares(x, table.params, Eigen::VectorXd::Ones(table.rows()), ridge);
  return SemiAutoProjection{std::move(fit.intercept), std::move(fit.coef), std::move(stat_columns)};
}

Eigen::MatrixXd project_statistics(const ReferenceTable& table, const SemiAutoProjection& projection) {
  Eigen::MatrixXd x(table.rows(), static_cast<Eigen::Index>(projection.stat_columns.size()));
  for (std::size_t c = 0; c < projection.stat_columns.size(); ++c)
    x.col(static_cast<Eigen::Index>(c)) = table.stats.col(projection.stat_columns[c]);
  return (x * projection.coef).rowwise() + projection.intercept.transpose();
}

Eigen::MatrixXd semi_automatic_statistics(const ReferenceTable& table, double ridge) {
  return project_statistics(table, fit_semi_automatic(table, {}, ridge));
}

}  // namespace abcbl
