#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "abcbl/core.hpp"
#include "abcbl/errors.hpp"
#include "abcbl/eval.hpp"
#include "abcbl/models.hpp"
#include "abcbl/regress.hpp"
#include "abcbl/table_io.hpp"
#include "helpers.hpp"

using namespace abcbl;
using abcbl::test::accept_all;
using abcbl::test::make_table;
using abcbl::test::vec;

namespace {

ReferenceTable linear_truth(Eigen::Index n, Eigen::Index p, Eigen::Index d, std::uint64_t seed, double noise = 0.5) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd s(n, d), th(n, p), b(d, p);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = z(rng);
  for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = 2.0 * z(rng);
  th = s * b;
  for (Eigen::Index k = 0; k < th.size(); ++k) th.data()[k] += noise * z(rng);
  return make_table(th, s);
}

class FixedRegressor final : public ConditionalRegressor {
 public:
  FixedRegressor(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> mu,
                 std::function<Eigen::VectorXd(const Eigen::VectorXd&)> sigma, Eigen::Index p)
      : mu_(std::move(mu)), sigma_(std::move(sigma)), floor_(Eigen::VectorXd::Constant(p, 1e-300)) {}
  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& s) const override { return mu_(s); }
  Eigen::VectorXd scale(const Eigen::Ref<const Eigen::VectorXd>& s) const override { return sigma_(s); }
  const Eigen::VectorXd& variance_floor() const override { return floor_; }
  std::string describe() const override { return "fixed"; }

 private:
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> mu_, sigma_;
  Eigen::VectorXd floor_;
};

double ks_to(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd x = a.col(0), y = b.col(0);
  return ks_distance(std::span<const double>(x.data(), x.size()), std::span<const double>(y.data(), y.size()));
}

}  // namespace

TEST_CASE("two-point least squares") {
  Eigen::MatrixXd th(2, 1), s(2, 1);
  th << 1, 3;
  s << 0, 2;
  const ReferenceTable t = make_table(th, s);
  const AcceptanceResult acc = accept_all(t);
  const LinearFit fit = fit_weighted_linear(t, vec({1.0}), acc, 0.0);
  CHECK(fit.beta(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.alpha[0] == doctest::Approx(2.0).epsilon(1e-14));
  const AdjustedSample adj = linear_adjust(t, fit, vec({1.0}), acc);
  CHECK(adj.values(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(adj.values(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(adj.provenance.method == "linear");
  CHECK(adj.weights == acc.weights);
}

TEST_CASE("too few rows for the linear fit") {
  const ReferenceTable t = linear_truth(2, 1, 2, 1);
  CHECK_THROWS_AS(fit_weighted_linear(t, vec({0, 0}), accept_all(t), 0.0), ValidationError);
}

TEST_CASE("independent theta gives a slope within Monte Carlo error of zero") {
  Rng rng(2);
  std::normal_distribution<double> z;
  const Eigen::Index n = 20000;
  Eigen::MatrixXd th(n, 1), s(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    th(i, 0) = z(rng);
    s(i, 0) = z(rng);
  }
  const ReferenceTable t = make_table(th, s);
  const LinearFit fit = fit_weighted_linear(t, vec({0.0}), accept_all(t), 0.0);
  CHECK(std::abs(fit.beta(0, 0)) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("duplicating every accepted row leaves the fit unchanged") {
  const ReferenceTable t = linear_truth(300, 2, 3, 3);
  const AcceptanceResult acc = accept(distances(t, vec({0, 0, 0}), compute_scale(t)), 150, KernelKind::epanechnikov);
  const LinearFit a = fit_weighted_linear(t, vec({0, 0, 0}), acc, kDefaultRidge);
  Eigen::MatrixXd th2(600, 2), s2(600, 3);
  th2 << t.params, t.params;
  s2 << t.stats, t.stats;
  const ReferenceTable t2 = make_table(th2, s2);
  AcceptanceResult acc2;
  acc2.weights.resize(600);
  acc2.weights << acc.weights, acc.weights;
  acc2.distances = Eigen::VectorXd::Zero(600);
  for (auto i : acc.accepted) acc2.accepted.push_back(i);
  for (auto i : acc.accepted) acc2.accepted.push_back(i + 300);
  const LinearFit b = fit_weighted_linear(t2, vec({0, 0, 0}), acc2, kDefaultRidge);
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.alpha - b.alpha).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("null adjustments return the input rows") {
  const ReferenceTable t = linear_truth(50, 2, 2, 4);
  const AcceptanceResult acc = accept_all(t);
  LinearFit zero;
  zero.alpha = Eigen::VectorXd::Zero(2);
  zero.beta = Eigen::MatrixXd::Zero(2, 2);
  CHECK(linear_adjust(t, zero, vec({0, 0}), acc).values == t.params);

  ReferenceTable same = t;
  same.stats.rowwise() = vec({1.5, -2.0}).transpose();
  const LinearFit fit = fit_weighted_linear(t, vec({0, 0}), acc, 0.0);
  CHECK(linear_adjust(same, fit, vec({1.5, -2.0}), acc).values == same.params);
}

TEST_CASE("singular system: error without ridge, survives with ridge") {
  Rng rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd th(100, 1), s(100, 2);
  for (Eigen::Index i = 0; i < 100; ++i) {
    s(i, 0) = z(rng);
    s(i, 1) = 2.0 * s(i, 0);
    th(i, 0) = s(i, 0) + 0.1 * z(rng);
  }
  const ReferenceTable t = make_table(th, s);
  CHECK_THROWS_AS(fit_weighted_linear(t, vec({0, 0}), accept_all(t), 0.0), NumericalError);
  const LinearFit fit = fit_weighted_linear(t, vec({0, 0}), accept_all(t), kDefaultRidge);
  CHECK(fit.beta.allFinite());
}

TEST_CASE("location equivariance") {
  const ReferenceTable t = linear_truth(400, 2, 2, 6);
  ReferenceTable shifted = t;
  shifted.params.array() += 7.25;
  const Eigen::VectorXd s_obs = vec({0.3, -0.1});
  const AcceptanceResult acc = accept(distances(t, s_obs, compute_scale(t)), 200, KernelKind::epanechnikov);
  for (auto kind : {Adjustment::none, Adjustment::linear, Adjustment::hetero}) {
    const AdjustedSample a = adjust(t, s_obs, acc, kind);
    const AdjustedSample b = adjust(shifted, s_obs, acc, kind);
    CHECK(((b.values.array() - 7.25) - a.values.array()).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("affine maps of the statistics leave linear adjustment unchanged") {
  const ReferenceTable t = linear_truth(500, 2, 3, 7);
  const Eigen::VectorXd s_obs = vec({0.5, 1.0, -0.5});
  const AcceptanceResult acc = accept(distances(t, s_obs, compute_scale(t)), 250, KernelKind::uniform);
  Eigen::MatrixXd a(3, 3);
  a << 2, 1, 0, 0, 1, -3, 1, 0, 0.5;
  const Eigen::VectorXd b = vec({10, -4, 2});
  ReferenceTable u = t;
  u.stats = (t.stats * a.transpose()).rowwise() + b.transpose();
  const Eigen::VectorXd u_obs = a * s_obs + b;
  const AdjustedSample x = linear_adjust(t, fit_weighted_linear(t, s_obs, acc, 0.0), s_obs, acc);
  const AdjustedSample y = linear_adjust(u, fit_weighted_linear(u, u_obs, acc, 0.0), u_obs, acc);
  CHECK((x.values - y.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("heteroscedastic fit of a homoscedastic truth has nearly constant scale") {
  const ReferenceTable t = linear_truth(10000, 1, 2, 8);
  const AcceptanceResult acc = accept_all(t);
  const HeteroFit fit = fit_heteroscedastic(t, vec({0, 0}), acc);
  Eigen::VectorXd sig(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) sig[i] = fit.regressor->scale(t.stats.row(i).transpose())[0];
  const double mean = sig.mean();
  const double sd = std::sqrt((sig.array() - mean).square().sum() / (sig.size() - 1));
  CHECK(sd / mean < 0.2);
}

TEST_CASE("degree-2 mean captures a quadratic truth") {
  Rng rng(9);
  std::normal_distribution<double> z;
  const Eigen::Index n = 3000;
  Eigen::MatrixXd th(n, 1), s(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, 0) = z(rng);
    th(i, 0) = s(i, 0) * s(i, 0) + 0.1 * z(rng);
  }
  const ReferenceTable t = make_table(th, s);
  const AcceptanceResult acc = accept_all(t);
  auto residual_var = [&](int degree) {
    HeteroOptions o;
    o.degree = degree;
    const HeteroFit f = fit_heteroscedastic(t, vec({0.0}), acc, o);
    double acc2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc2 += std::pow(th(i, 0) - f.regressor->mean(s.row(i).transpose())[0], 2);
    return acc2 / static_cast<double>(n);
  };
  CHECK(residual_var(2) < residual_var(1));
  CHECK(residual_var(2) < 0.02);
}

TEST_CASE("degree-1 constant-scale fit reproduces linear adjustment") {
  const ReferenceTable t = linear_truth(400, 3, 2, 10);
  const Eigen::VectorXd s_obs = vec({0.2, 0.1});
  const AcceptanceResult acc = accept(distances(t, s_obs, compute_scale(t)), 200, KernelKind::gaussian);
  HeteroOptions o;
  o.degree = 1;
  o.constant_scale = true;
  const AdjustedSample h = hetero_adjust(t, *fit_heteroscedastic(t, s_obs, acc, o).regressor, s_obs, acc);
  const AdjustedSample l = linear_adjust(t, fit_weighted_linear(t, s_obs, acc), s_obs, acc);
  CHECK((h.values - l.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("hetero_adjust with fixed regressors") {
  const ReferenceTable t = linear_truth(40, 2, 1, 11);
  const AcceptanceResult acc = accept_all(t);
  const FixedRegressor constant([](const Eigen::VectorXd&) { return vec({1.0, -1.0}); },
                                [](const Eigen::VectorXd&) { return vec({2.0, 3.0}); }, 2);
  CHECK((hetero_adjust(t, constant, vec({0.0}), acc).values - t.params).cwiseAbs().maxCoeff() < 1e-14);

  // sigma(s^i) = 2 sigma(s_obs) away from s_obs.
  const FixedRegressor doubled([](const Eigen::VectorXd&) { return vec({0.5, 0.5}); },
                               [](const Eigen::VectorXd& s) {
                                 return s[0] == 99.0 ? vec({1.0, 1.0}) : vec({2.0, 2.0});
                               },
                               2);
  const AdjustedSample out = hetero_adjust(t, doubled, vec({99.0}), acc);
  const Eigen::MatrixXd expect = ((t.params.array() - 0.5) * 0.5 + 0.5).matrix();
  CHECK((out.values - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("heteroscedastic preconditions and fallback") {
  const ReferenceTable t = linear_truth(6, 1, 2, 12);
  // Degree-2 basis for d=2 has 5 terms; 6 rows are too few, degree 1 (2 terms) needs > 4.
  HeteroOptions o;
  const HeteroFit fit = fit_heteroscedastic(t, vec({0, 0}), accept_all(t), o);
  CHECK_FALSE(fit.warnings.empty());
  const ReferenceTable tiny = linear_truth(4, 1, 2, 12);
  CHECK_THROWS_AS(fit_heteroscedastic(tiny, vec({0, 0}), accept_all(tiny), o), ValidationError);
  o.degree = 3;
  CHECK_THROWS_AS(fit_heteroscedastic(t, vec({0, 0}), accept_all(t), o), ValidationError);

  // Exactly collinear statistics make the degree-2 basis singular without ridge.
  Rng rng(13);
  std::normal_distribution<double> z;
  Eigen::MatrixXd th(200, 1), s(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    s(i, 0) = z(rng);
    s(i, 1) = z(rng);
    th(i, 0) = s(i, 0) + z(rng);
  }
  s.col(1) = s.col(0).array().square();  // s_2 = s_1^2 duplicates a quadratic term
  const ReferenceTable coll = make_table(th, s);
  HeteroOptions o2;
  o2.ridge = 0.0;
  const HeteroFit f2 = fit_heteroscedastic(coll, vec({0, 0}), accept_all(coll), o2);
  CHECK(dynamic_cast<const PolynomialRegressor&>(*f2.regressor).degree() == 1);
  CHECK_FALSE(f2.warnings.empty());
}

TEST_CASE("mixture p=1: regression adjustment beats plain rejection in KS distance") {
  const MixtureModelConfig cfg;
  const MixtureModel model(cfg);
  const ReferenceTable t = build_reference_table(model, model.prior(), 100000, 14);
  const Eigen::VectorXd s_obs = vec({5.0});
  const AcceptanceResult acc = accept(distances(t, s_obs, compute_scale(t)), 10000, KernelKind::uniform);
  Rng rng(15);
  const Eigen::MatrixXd exact = exact_posterior_sample(s_obs, cfg, 100000, rng);
  const double ks_rej = ks_to(rejection_sample(t, acc).values, exact);
  const double ks_het = ks_to(adjust(t, s_obs, acc, Adjustment::hetero).values, exact);
  CHECK(ks_het < ks_rej);
}

TEST_CASE("out-of-support rows are flagged, not clipped") {
  Eigen::MatrixXd th(4, 1), s(4, 1);
  th << 0.1, 0.9, 0.5, 0.5;
  s << -10, 10, 0, 0;
  const ReferenceTable t = make_table(th, s);
  LinearFit fit;
  fit.alpha = vec({0.5});
  fit.beta = Eigen::MatrixXd::Constant(1, 1, 0.1);
  AdjustedSample a = linear_adjust(t, fit, vec({0.0}), accept_all(t));
  flag_out_of_support(a, UniformBoxPrior(1, 0.0, 1.0));
  CHECK(a.out_of_support == 2);
  CHECK(a.values(0, 0) == doctest::Approx(1.1));
  CHECK(a.warnings.size() == 1);
}

TEST_CASE("adjustment names") {
  CHECK(parse_adjustment("rejection") == Adjustment::none);
  CHECK(parse_adjustment("none") == Adjustment::none);
  CHECK(parse_adjustment("heteroscedastic") == Adjustment::hetero);
  CHECK(to_string(Adjustment::linear) == "linear");
  CHECK_THROWS_AS(parse_adjustment("neural"), ValidationError);
}

TEST_CASE("sample files round-trip with provenance") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "abcbl_sample_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ReferenceTable t = linear_truth(30, 2, 1, 16);
  AdjustedSample a = adjust(t, vec({0.0}), accept_all(t), Adjustment::linear);
  a.warnings = {"first", "second"};
  write_sample(dir / "s.csv", a);
  const AdjustedSample b = read_sample(dir / "s.csv");
  CHECK(b.values.cwiseEqual(a.values).all());
  CHECK(b.provenance.method == "linear");
  CHECK(b.provenance.recipe == a.provenance.recipe);
  CHECK(b.param_names == a.param_names);
  const auto meta = parse_key_values(read_file(sidecar_path(dir / "s.csv")));
  CHECK(meta.at("warnings") == "first | second");
  fs::remove_all(dir);
}
