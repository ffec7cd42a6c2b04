#include "abcbl/regress.hpp"

#include <cmath>
#include <sstream>

#include "abcbl/errors.hpp"
#include "abcbl/table_io.hpp"

namespace abcbl {

namespace {

constexpr double kMinRcond = 1e-13;

struct AcceptedRows {
  Eigen::MatrixXd theta;  // m x p
  Eigen::MatrixXd x;      // m x d, s^i - s_obs
  Eigen::VectorXd w;
  std::vector<Eigen::Index> index;
};

AcceptedRows gather(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const AcceptanceResult& acc) {
  if (s_obs.size() != table.d()) throw ValidationError("observed statistics have wrong dimension");
  if (acc.weights.size() != table.rows()) throw ValidationError("acceptance result does not match the table");
  AcceptedRows rows;
  for (auto i : acc.accepted)
    if (acc.weights[i] > 0.0) rows.index.push_back(i);
  const auto m = static_cast<Eigen::Index>(rows.index.size());
  rows.theta.resize(m, table.p());
  rows.x.resize(m, table.d());
  rows.w.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = rows.index[static_cast<std::size_t>(r)];
    rows.theta.row(r) = table.params.row(i);
    rows.x.row(r) = table.stats.row(i) - s_obs.transpose();
    rows.w[r] = acc.weights[i];
  }
  return rows;
}

AdjustedSample empty_like(const ReferenceTable& table, const AcceptedRows& rows, std::string method) {
  AdjustedSample out;
  out.values.resize(static_cast<Eigen::Index>(rows.index.size()), table.p());
  out.weights = rows.w;
  out.source_indices = rows.index;
  out.param_names = table.param_names;
  out.provenance.method = std::move(method);
  return out;
}

}  // namespace

WlsFit weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::VectorXd& w,
                              double ridge) {
  if (x.rows() != y.rows() || w.size() != x.rows()) throw ValidationError("least squares: row count mismatch");
  if (!(ridge >= 0.0)) throw ValidationError("ridge must be non-negative");
  const double total = w.sum();
  if (!(total > 0.0)) throw NumericalError("least squares: weights sum to zero");
  const Eigen::Index q = x.cols();
  const Eigen::RowVectorXd xbar = (w.transpose() * x) / total;
  const Eigen::RowVectorXd ybar = (w.transpose() * y) / total;
  WlsFit fit;
  fit.coef.resize(q, y.cols());
  if (q == 0) {
    fit.intercept = ybar.transpose();
    return fit;
  }
  const Eigen::MatrixXd xc = x.rowwise() - xbar;
  const Eigen::MatrixXd yc = y.rowwise() - ybar;
  Eigen::MatrixXd cxx = xc.transpose() * w.asDiagonal() * xc / total;
  const Eigen::MatrixXd cxy = xc.transpose() * w.asDiagonal() * yc / total;
  cxx.diagonal().array() += ridge * cxx.trace() / static_cast<double>(q);
  Eigen::LLT<Eigen::MatrixXd> llt(cxx);
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond))
    throw NumericalError("regression system is singular even after ridge; increase keep or use fewer statistics");
  fit.coef = llt.solve(cxy);
  fit.intercept = (ybar - xbar * fit.coef).transpose();
  return fit;
}

AdjustedSample rejection_sample(const ReferenceTable& table, const AcceptanceResult& acceptance) {
  if (acceptance.weights.size() != table.rows()) throw ValidationError("acceptance result does not match the table");
  AdjustedSample out;
  out.source_indices = acceptance.accepted;
  out.values.resize(static_cast<Eigen::Index>(acceptance.accepted.size()), table.p());
  out.weights.resize(out.values.rows());
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    const auto i = acceptance.accepted[static_cast<std::size_t>(r)];
    out.values.row(r) = table.params.row(i);
    out.weights[r] = acceptance.weights[i];
  }
  out.param_names = table.param_names;
  out.provenance.method = "rejection";
  out.provenance.recipe = "rejection: " + std::to_string(acceptance.accepted.size()) + " accepted, epsilon=" +
                          format_double(acceptance.epsilon);
  return out;
}

LinearFit fit_weighted_linear(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                              const AcceptanceResult& acceptance, double ridge) {
  const AcceptedRows rows = gather(table, s_obs, acceptance);
  const auto m = static_cast<Eigen::Index>(rows.index.size());
  if (m < table.d() + 1)
    throw ValidationError("linear adjustment needs at least d+1=" + std::to_string(table.d() + 1) +
                          " accepted rows, got " + std::to_string(m));
  WlsFit wls = weighted_least_squares(rows.x, rows.theta, rows.w, ridge);
  LinearFit fit;
  fit.alpha = std::move(wls.intercept);
  fit.beta = std::move(wls.coef);
  fit.weights = rows.w;
  fit.ridge = ridge;
  return fit;
}

AdjustedSample linear_adjust(const ReferenceTable& table, const LinearFit& fit, const Eigen::VectorXd& s_obs,
                             const AcceptanceResult& acceptance) {
  const AcceptedRows rows = gather(table, s_obs, acceptance);
  if (fit.beta.rows() != table.d() || fit.beta.cols() != table.p())
    throw ValidationError("linear fit does not match the table dimensions");
  AdjustedSample out = empty_like(table, rows, "linear");
  out.values = rows.theta - rows.x * fit.beta;
  out.provenance.recipe = "linear: weighted least squares on s - s_obs, ridge=" + format_double(fit.ridge) + ", " +
                          std::to_string(rows.index.size()) + " rows";
  return out;
}

// ---------------------------------------------------------------------------

Eigen::Index PolynomialRegressor::basis_size(Eigen::Index d, int degree) {
  return degree == 1 ? d : d + d * (d + 1) / 2;
}

PolynomialRegressor::PolynomialRegressor(Eigen::VectorXd center, int degree, WlsFit mean_fit, WlsFit log_var_fit,
                                         bool constant_scale, Eigen::VectorXd floor)
    : center_(std::move(center)),
      degree_(degree),
      mean_fit_(std::move(mean_fit)),
      log_var_fit_(std::move(log_var_fit)),
      constant_scale_(constant_scale),
      floor_(std::move(floor)) {}

Eigen::RowVectorXd PolynomialRegressor::basis(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  const Eigen::Index d = center_.size();
  Eigen::RowVectorXd b(basis_size(d, degree_));
  for (Eigen::Index k = 0; k < d; ++k) b[k] = s[k] - center_[k];
  if (degree_ == 2) {
    Eigen::Index c = d;
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index l = k; l < d; ++l) b[c++] = b[k] * b[l];
  }
  return b;
}

Eigen::VectorXd PolynomialRegressor::mean(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  return mean_fit_.intercept + (basis(s) * mean_fit_.coef).transpose();
}

Eigen::VectorXd PolynomialRegressor::scale(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  Eigen::VectorXd log_var = log_var_fit_.intercept;
  if (!constant_scale_) log_var += (basis(s) * log_var_fit_.coef).transpose();
  return log_var.array().exp().max(floor_.array()).sqrt();
}

std::string PolynomialRegressor::describe() const {
  return "polynomial degree " + std::to_string(degree_) + (constant_scale_ ? ", constant scale" : ", log-variance scale");
}

HeteroFit fit_heteroscedastic(const ReferenceTable& table, const Eigen::VectorXd& s_obs,
                              const AcceptanceResult& acceptance, const HeteroOptions& options) {
  if (options.degree != 1 && options.degree != 2) throw ValidationError("heteroscedastic basis degree must be 1 or 2");
  const AcceptedRows rows = gather(table, s_obs, acceptance);
  const auto m = static_cast<Eigen::Index>(rows.index.size());
  HeteroFit result;
  int degree = options.degree;
  if (degree == 2 && m <= PolynomialRegressor::basis_size(table.d(), 2) + 2) {
    result.warnings.push_back("too few accepted rows for a degree-2 basis; using degree 1");
    degree = 1;
  }
  if (m <= PolynomialRegressor::basis_size(table.d(), 1) + 2)
    throw ValidationError("heteroscedastic adjustment needs more than " +
                          std::to_string(PolynomialRegressor::basis_size(table.d(), 1) + 2) + " accepted rows, got " +
                          std::to_string(m));

  const double total = rows.w.sum();
  const Eigen::RowVectorXd theta_bar = rows.w.transpose() * rows.theta / total;
  const Eigen::VectorXd response_var =
      (rows.w.transpose() * (rows.theta.rowwise() - theta_bar).array().square().matrix() / total).transpose();
  const Eigen::VectorXd floor =
      (1e-12 * response_var.array()).max(std::numeric_limits<double>::min()).matrix();

  for (;;) {
    const PolynomialRegressor probe(s_obs, degree, {}, {}, true, floor);
    Eigen::MatrixXd design(m, PolynomialRegressor::basis_size(table.d(), degree));
    for (Eigen::Index r = 0; r < m; ++r) design.row(r) = probe.basis(table.stats.row(rows.index[r]).transpose());
    try {
      WlsFit mean_fit = weighted_least_squares(design, rows.theta, rows.w, options.ridge);
      const Eigen::MatrixXd fitted = (design * mean_fit.coef).rowwise() + mean_fit.intercept.transpose();
      const Eigen::MatrixXd resid = rows.theta - fitted;
      Eigen::MatrixXd log_r2(m, table.p());
      for (Eigen::Index j = 0; j < table.p(); ++j)
        log_r2.col(j) = (resid.col(j).array().square() + floor[j]).log().matrix();
      WlsFit var_fit = options.constant_scale
                           ? weighted_least_squares(Eigen::MatrixXd(m, 0), log_r2, rows.w, 0.0)
                           : weighted_least_squares(design, log_r2, rows.w, options.ridge);
      result.regressor = std::make_shared<PolynomialRegressor>(s_obs, degree, std::move(mean_fit), std::move(var_fit),
                                                               options.constant_scale, floor);
      return result;
    } catch (const NumericalError&) {
      if (degree == 1) throw;
      result.warnings.push_back("degree-2 basis is singular; fell back to degree 1");
      degree = 1;
    }
  }
}

AdjustedSample hetero_adjust(const ReferenceTable& table, const ConditionalRegressor& regressor,
                             const Eigen::VectorXd& s_obs, const AcceptanceResult& acceptance) {
  const AcceptedRows rows = gather(table, s_obs, acceptance);
  AdjustedSample out = empty_like(table, rows, "hetero");
  const Eigen::VectorXd mu_obs = regressor.mean(s_obs);
  const Eigen::VectorXd sigma_obs = regressor.scale(s_obs);
  const Eigen::ArrayXd floor_scale = regressor.variance_floor().array().sqrt();
  Eigen::Index at_floor = 0;
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    const Eigen::VectorXd s_i = table.stats.row(rows.index[r]).transpose();
    const Eigen::VectorXd mu_i = regressor.mean(s_i);
    const Eigen::VectorXd sigma_i = regressor.scale(s_i);
    if ((sigma_i.array() <= floor_scale).any()) ++at_floor;
    out.values.row(r) =
        (mu_obs.array() + sigma_obs.array() / sigma_i.array() * (rows.theta.row(r).transpose() - mu_i).array())
            .transpose();
  }
  if (at_floor * 100 > out.values.rows())
    out.warnings.push_back("scale model at its variance floor for " + std::to_string(at_floor) + " of " +
                           std::to_string(out.values.rows()) + " rows; heteroscedastic fit unreliable");
  out.provenance.recipe = "hetero: " + regressor.describe() + ", " + std::to_string(rows.index.size()) + " rows";
  return out;
}

std::string_view to_string(Adjustment a) {
  switch (a) {
    case Adjustment::none:
      return "rejection";
    case Adjustment::linear:
      return "linear";
    case Adjustment::hetero:
      return "hetero";
  }
  return "rejection";
}

Adjustment parse_adjustment(std::string_view name) {
  if (name == "rejection" || name == "none") return Adjustment::none;
  if (name == "linear") return Adjustment::linear;
  if (name == "hetero" || name == "heteroscedastic") return Adjustment::hetero;
  throw ValidationError("unknown adjustment '" + std::string(name) + "'");
}

AdjustedSample adjust(const ReferenceTable& table, const Eigen::VectorXd& s_obs, const AcceptanceResult& acceptance,
                      Adjustment kind, const AdjustOptions& options) {
  switch (kind) {
    case Adjustment::none:
      return rejection_sample(table, acceptance);
    case Adjustment::linear:
      return linear_adjust(table, fit_weighted_linear(table, s_obs, acceptance, options.ridge), s_obs, acceptance);
    case Adjustment::hetero: {
      HeteroFit fit = fit_heteroscedastic(table, s_obs, acceptance, options.hetero);
      AdjustedSample out = hetero_adjust(table, *fit.regressor, s_obs, acceptance);
      out.warnings.insert(out.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
      return out;
    }
  }
  throw ValidationError("unknown adjustment");
}

void flag_out_of_support(AdjustedSample& sample, const Prior& prior) {
  Eigen::Index count = 0;
  for (Eigen::Index r = 0; r < sample.values.rows(); ++r)
    if (!prior.in_support(sample.values.row(r).transpose())) ++count;
  sample.out_of_support = count;
  if (count > 0)
    sample.warnings.push_back(std::to_string(count) + " adjusted rows lie outside the prior support (not clipped)");
}

void write_sample(const std::filesystem::path& path, const AdjustedSample& sample) {
  std::vector<std::string> header;
  for (const auto& n : sample.param_names) header.push_back("theta_" + n);
  write_file_atomic(path, matrix_to_csv(kSampleFormat, header, sample.values));
  std::string warnings;
  for (const auto& w : sample.warnings) warnings += (warnings.empty() ? "" : " | ") + w;
  write_file_atomic(sidecar_path(path), key_values_to_text({{"format", kSampleMetaFormat},
                                                            {"method", sample.provenance.method},
                                                            {"recipe", sample.provenance.recipe},
                                                            {"rows", std::to_string(sample.values.rows())},
                                                            {"out_of_support", std::to_string(sample.out_of_support)},
                                                            {"warnings", warnings}}));
}

AdjustedSample read_sample(const std::filesystem::path& path) {
  CsvMatrix m = parse_csv_matrix(read_file(path));
  if (m.format_tag != kSampleFormat) throw IoError("'" + path.string() + "': not a sample file");
  AdjustedSample out;
  for (const auto& h : m.header) {
    if (h.rfind("theta_", 0) != 0) throw IoError("unexpected column '" + h + "'");
    out.param_names.push_back(h.substr(6));
  }
  out.values = std::move(m.values);
  out.weights = Eigen::VectorXd::Ones(out.values.rows());
  const auto meta = sidecar_path(path);
  if (std::filesystem::exists(meta)) {
    auto kv = parse_key_values(read_file(meta));
    out.provenance.method = kv["method"];
    out.provenance.recipe = kv["recipe"];
  }
  return out;
}

}  // namespace abcbl
