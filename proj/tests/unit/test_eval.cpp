#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "abcbl/blin.hpp"
#include "abcbl/core.hpp"
#include "abcbl/errors.hpp"
#include "abcbl/eval.hpp"
#include "abcbl/models.hpp"
#include "abcbl/regress.hpp"
#include "helpers.hpp"

using namespace abcbl;
using abcbl::test::vec;

namespace {

Eigen::MatrixXd normal_draws(Eigen::Index m, Eigen::Index k, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(m, k);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  return x;
}

std::span<const double> col_span(const Eigen::MatrixXd& x, Eigen::Index j) {
  return {x.col(j).data(), static_cast<std::size_t>(x.rows())};
}

}  // namespace

TEST_CASE("Silverman bandwidth") {
  const Eigen::MatrixXd x = normal_draws(10000, 1, 1);
  const double h = silverman_bandwidth(col_span(x, 0));
  CHECK(h == doctest::Approx(1.06 * std::pow(10000.0, -0.2)).epsilon(0.05));

  // IQR of zero falls back to the standard deviation.
  std::vector<double> spiky(100, 0.0);
  spiky[0] = -5.0;
  spiky[99] = 5.0;
  CHECK(silverman_bandwidth(spiky) > 0.0);
  CHECK(silverman_bandwidth(std::vector<double>(10, 3.0)) == 0.0);
}

TEST_CASE("KDE integrates to one and peaks at the centre") {
  const Eigen::MatrixXd x = normal_draws(500, 1, 2);
  const KdeModel q = fit_kde(x);
  double total = 0.0, best = -1.0, mode = 0.0;
  const double step = 0.001;
  for (double t = -12.0; t < 12.0; t += step) {
    const double f = q.density(vec({t + 0.5 * step}));
    total += f * step;
    if (f > best) best = f, mode = t;
  }
  CHECK(std::abs(total - 1.0) < 1e-4);
  CHECK(std::abs(mode) < 0.3);
  CHECK(q.cdf(-50.0) < 1e-12);
  CHECK(q.cdf(50.0) == doctest::Approx(1.0));
}

TEST_CASE("KDE of standard normal draws at zero") {
  const KdeModel q = fit_kde(normal_draws(20000, 1, 3));
  CHECK(q.density(vec({0.0})) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(0.05));
}

TEST_CASE("bivariate KDE integrates to one") {
  const KdeModel q = fit_kde(normal_draws(300, 2, 4));
  double total = 0.0;
  const double step = 0.05;
  for (double a = -8.0; a < 8.0; a += step)
    for (double b = -8.0; b < 8.0; b += step) total += q.density(vec({a + 0.5 * step, b + 0.5 * step})) * step * step;
  CHECK(std::abs(total - 1.0) < 1e-3);
}

TEST_CASE("fit_kde rejects bad input") {
  CHECK_THROWS_AS(fit_kde(Eigen::MatrixXd::Zero(1, 1)), ValidationError);
  CHECK_THROWS_AS(fit_kde(normal_draws(10, 3, 5)), ValidationError);
  CHECK_THROWS_AS(fit_kde(Eigen::MatrixXd::Constant(10, 1, 2.0)), ValidationError);
}

TEST_CASE("KL is zero when the exact density is the KDE itself") {
  const Eigen::MatrixXd abc = normal_draws(400, 2, 6);
  const KdeModel q = fit_kde(abc);
  const Eigen::MatrixXd draws = normal_draws(1000, 2, 7);
  const KlReport r =
      kl_divergence(draws, [&](const Eigen::Ref<const Eigen::VectorXd>& x) { return std::log(q.density(x)); }, q);
  CHECK(std::abs(r.estimate) < 1e-12);
  CHECK(r.floor_hits == 0);
  CHECK(r.n_oracle == 1000);
  CHECK(r.dims == 2);
}

TEST_CASE("KL is invariant to permuting the ABC sample and to threads") {
  const Eigen::MatrixXd abc = normal_draws(400, 1, 8);
  const Eigen::MatrixXd reversed = abc.colwise().reverse();
  const Eigen::MatrixXd draws = normal_draws(2000, 1, 9);
  const boost::math::normal n01;
  const LogPdf logp = [&](const Eigen::Ref<const Eigen::VectorXd>& x) {
    return std::log(boost::math::pdf(n01, x[0]));
  };
  const KlReport a = kl_divergence(draws, logp, abc);
  const KlReport b = kl_divergence(draws, logp, reversed, 3);
  CHECK(a.estimate == doctest::Approx(b.estimate).epsilon(1e-12));
  CHECK(a.estimate > 0.0);
  CHECK(a.estimate < 0.05);
  CHECK(a.standard_error > 0.0);
}

TEST_CASE("KL counts floor hits for a far-away ABC sample") {
  Eigen::MatrixXd abc = normal_draws(100, 1, 10);
  abc.array() = abc.array() * 0.01 + 1000.0;
  const Eigen::MatrixXd draws = normal_draws(50, 1, 11);
  const KlReport r = kl_divergence(draws, [](const Eigen::Ref<const Eigen::VectorXd>&) { return 0.0; }, abc);
  CHECK(r.floor_hits == 50);
  CHECK(r.estimate == doctest::Approx(-std::log(kKdeDensityFloor)));
}

TEST_CASE("KS distance examples and metric properties") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
  CHECK(ks_distance(std::vector<double>{1, 2}, std::vector<double>{2, 3}) == doctest::Approx(0.5));

  Eigen::MatrixXd x = normal_draws(300, 3, 12);
  x.col(1).array() += 0.3;
  const auto c0 = col_span(x, 0), c1 = col_span(x, 1), c2 = col_span(x, 2);
  CHECK(ks_distance(c0, c1) == ks_distance(c1, c0));
  CHECK(ks_distance(c0, c2) <= ks_distance(c0, c1) + ks_distance(c1, c2) + 1e-15);

  const Eigen::MatrixXd big = normal_draws(100000, 1, 13);
  const boost::math::normal n01;
  CHECK(ks_distance(col_span(big, 0), [&](double t) { return boost::math::cdf(n01, t); }) < 0.01);
}

TEST_CASE("moment report") {
  const Eigen::MatrixXd x = normal_draws(1000, 2, 14);
  const SampleMoments sm = sample_moments(x);
  const MomentReport same = moment_report(x, sm.mean, sm.cov);
  CHECK(same.max_abs < 1e-12);
  const MomentReport off = moment_report(x, sm.mean + vec({1.0, 0.0}), sm.cov);
  CHECK(off.mean_diff[0] == doctest::Approx(-1.0));
  CHECK(off.max_abs == doctest::Approx(1.0));
  const std::string text = format_moment_report(off, {"a", "b"});
  CHECK(text.find("mean_diff.theta_a") != std::string::npos);
}

TEST_CASE("conjugate rejection sample mean is close to the exact posterior mean") {
  const ConjugateGaussianModel model(1);
  const NormalPrior prior(1, 0.0, 1.0);
  const ReferenceTable t = build_reference_table(model, prior, 100000, 15);
  const Eigen::VectorXd s_obs = vec({1.0});
  const AcceptanceResult acc = accept(distances(t, s_obs, compute_scale(t)), 2000, KernelKind::uniform);
  const AdjustedSample r = rejection_sample(t, acc);
  const double mean = r.values.col(0).mean();
  CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(0.5 / 2000.0) + 0.02);
}
