#include "varjm/baselines.hpp"
#include "varjm/csv.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <fstream>
#include <sstream>

namespace varjm {

OlsFit ols(const Matrix& x, const Vector& y) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (y.size() != n) throw BaselineError("design has " + std::to_string(n) + " rows but the response has " +
                                         std::to_string(y.size()));
  if (n <= p) throw BaselineError("need more observations (" + std::to_string(n) + ") than columns (" +
                                  std::to_string(p) + ")");
  const Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cond = s[0] / s[p - 1];
  if (!(s[p - 1] > 0.0) || !(cond < 1e10)) {
    std::ostringstream msg;
    msg << "stage-2 design is numerically singular (condition number " << cond << ")";
    throw BaselineError(msg.str());
  }
  OlsFit fit;
  fit.coef = svd.solve(y);
  const Vector resid = y - x * fit.coef;
  fit.df = static_cast<int>(n - p);
  fit.sigma = std::sqrt(resid.squaredNorm() / fit.df);
  const Matrix v = svd.matrixV();
  const Matrix cov = v * s.cwiseAbs2().cwiseInverse().asDiagonal() * v.transpose();
  fit.std_error = fit.sigma * cov.diagonal().cwiseSqrt();
  const boost::math::students_t dist(fit.df);
  const double tq = boost::math::quantile(dist, 0.975);
  fit.lower = fit.coef - tq * fit.std_error;
  fit.upper = fit.coef + tq * fit.std_error;
  return fit;
}

namespace {

Matrix time_design(const SubjectRecord& s) {
  Matrix h(s.num_obs(), 2);
  for (int j = 0; j < s.num_obs(); ++j) {
    h(j, 0) = 1.0;
    h(j, 1) = s.times[static_cast<std::size_t>(j)];
  }
  return h;
}

void require_three(const Dataset& data) {
  for (const auto& s : data.subjects())
    if (s.num_obs() < 3)
      throw BaselineError("subject " + s.id + " has " + std::to_string(s.num_obs()) +
                          " observations; two-stage fits need at least 3");
}

}  // namespace

StageOne subject_least_squares(const Dataset& data) {
  require_three(data);
  StageOne out;
  for (const auto& s : data.subjects()) {
    const Matrix h = time_design(s);
    const Matrix coef = h.colPivHouseholderQr().solve(s.markers);  // 2 x Q
    out.coefficients.push_back(coef.transpose());
  }
  out.covariance = residual_covariances(data, out.coefficients);
  return out;
}

std::vector<Matrix> residual_covariances(const Dataset& data, const std::vector<Matrix>& coefficients) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    const Matrix resid = s.markers - time_design(s) * coefficients[i].transpose();
    const Matrix centered = resid.rowwise() - resid.colwise().mean();
    out.push_back(centered.transpose() * centered / static_cast<double>(s.num_obs() - 1));
  }
  return out;
}

Matrix stage_two_design(const StageOne& stage1, const Dataset& data, const ModelSpec& spec) {
  Matrix x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(spec.features.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        feature_vector(spec.features, stage1.coefficients[i], stage1.covariance[i], data[i].covariates).transpose();
  }
  return x;
}

Vector outcome_vector(const Dataset& data) {
  Vector y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y[static_cast<Eigen::Index>(i)] = data[i].outcome;
  return y;
}

TwoStageFit tslm(const Dataset& data, const ModelSpec& spec) {
  TwoStageFit fit;
  fit.method = "tslm";
  fit.stage1 = subject_least_squares(data);
  const OlsFit stage2 = ols(stage_two_design(fit.stage1, data, spec), outcome_vector(data));
  fit.names = spec.coefficient_names();
  fit.estimate = stage2.coef;
  fit.std_error = stage2.std_error;
  fit.lower = stage2.lower;
  fit.upper = stage2.upper;
  return fit;
}

void write_two_stage_csv(const std::string& path, const TwoStageFit& fit) {
  std::ofstream out(path);
  if (!out) throw BaselineError("cannot write " + path);
  out << "method,parameter,mean,sd,q2.5,q97.5,rhat,ess_bulk\n";
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out << fit.method << ',' << fit.names[j] << ',' << csv::format_double(fit.estimate[k]) << ','
        << csv::format_double(fit.std_error[k]) << ',' << csv::format_double(fit.lower[k]) << ','
        << csv::format_double(fit.upper[k]) << ','
        << (fit.rhat.size() ? csv::format_double(fit.rhat[k]) : "NA") << ','
        << (fit.ess_bulk.size() ? csv::format_double(fit.ess_bulk[k]) : "NA") << '\n';
  }
}

}  // namespace varjm
