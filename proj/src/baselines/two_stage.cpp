#include "varjm/baselines.hpp"
#include "varjm/densities.hpp"

#include <cmath>

namespace varjm {

BayesianLinearRegression::BayesianLinearRegression(Matrix x, Vector y, std::vector<std::string> names,
                                                   double coef_sd, double tau)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(names)), coef_sd_(coef_sd), tau_(tau) {
  if (x_.rows() != y_.size()) throw BaselineError("design and response sizes differ");
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols())
    throw BaselineError("expected " + std::to_string(x_.cols()) + " coefficient names");
  xtx_ = x_.transpose() * x_;
  xty_ = x_.transpose() * y_;
  yty_ = y_.squaredNorm();
}

double BayesianLinearRegression::log_density(const Vector& u) const {
  Vector grad;
  return log_density_gradient(u, grad);
}

double BayesianLinearRegression::log_density_gradient(const Vector& u, Vector& grad) const {
  const auto p = x_.cols();
  const Vector beta = u.head(p);
  const double log_sigma = u[p];
  const double sigma = std::exp(log_sigma);
  const double n = static_cast<double>(y_.size());
  const Vector xtx_beta = xtx_ * beta;
  const double rss = std::max(yty_ - 2.0 * beta.dot(xty_) + beta.dot(xtx_beta), 0.0);
  const double var = coef_sd_ * coef_sd_;
  const double inv_s2 = std::exp(-2.0 * log_sigma);
  double lp = -0.5 * beta.squaredNorm() / var;
  lp += math::half_cauchy_lpdf(sigma, tau_) + log_sigma;
  lp += -n * log_sigma - 0.5 * rss * inv_s2;
  grad.resize(p + 1);
  grad.head(p) = -beta / var + (xty_ - xtx_beta) * inv_s2;
  grad[p] = math::half_cauchy_dlpdf(sigma, tau_) * sigma + 1.0 - n + rss * inv_s2;
  return std::isfinite(lp) ? lp : math::kNegInf;
}

std::vector<std::string> BayesianLinearRegression::parameter_names() const {
  auto out = names_;
  out.push_back("sigma");
  return out;
}

Vector BayesianLinearRegression::constrain(const Vector& u) const {
  Vector out = u;
  out[x_.cols()] = std::exp(u[x_.cols()]);
  return out;
}

StageOne posterior_mean_stage_one(const std::vector<ChainOutput>& chains, const ModelSpec& spec,
                                  std::size_t num_subjects) {
  const int q = spec.num_markers;
  StageOne out;
  out.coefficients.assign(num_subjects, Matrix::Zero(q, 2));
  out.covariance.assign(num_subjects, Matrix::Zero(q, q));
  double count = 0.0;
  for (const auto& c : chains) {
    for (Eigen::Index d = 0; d < c.draws.rows(); ++d) {
      const ParameterState state = state_from_constrained(c.draws.row(d).transpose(), spec, num_subjects);
      for (std::size_t i = 0; i < num_subjects; ++i) {
        out.coefficients[i] += state.subjects[i].b;
        out.covariance[i] += state.subjects[i].covariance();
      }
      count += 1.0;
    }
  }
  if (count == 0.0) throw BaselineError("no stage-1 draws");
  for (std::size_t i = 0; i < num_subjects; ++i) {
    out.coefficients[i] /= count;
    out.covariance[i] /= count;
  }
  return out;
}

TwoStageFit tsiv(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                 const BaselineRunOptions& options) {
  ModelSpec marker_spec = spec;
  marker_spec.include_outcome = false;
  const JointModel marker_model(data, marker_spec);

  RunOptions run1;
  run1.workers = options.workers;
  run1.inits = options.inits;
  for (int q = 0; q < spec.num_markers; ++q)
    for (int p = 0; p < 2; ++p) run1.summary_names.push_back("beta." + std::to_string(q + 1) + "." + std::to_string(p + 1));
  const RunResult first = run_chains(marker_model, config, run1);

  TwoStageFit fit;
  fit.method = "tsiv";
  for (const auto& p : first.summary.parameters)
    if (p.rhat > 1.1) fit.warnings.push_back("stage 1: R-hat of " + p.name + " is " + std::to_string(p.rhat));
  fit.stage1 = posterior_mean_stage_one(first.chains, marker_spec, data.size());

  const Matrix x = stage_two_design(fit.stage1, data, spec);
  const Vector y = outcome_vector(data);
  fit.names = spec.coefficient_names();
  const BayesianLinearRegression outcome(x, y, fit.names, spec.hyper.coef_sd, spec.hyper.tau1);

  // Start every chain near the ridge solution.
  const double ridge = 1.0 / (spec.hyper.coef_sd * spec.hyper.coef_sd);
  const Vector beta0 =
      (x.transpose() * x + ridge * Matrix::Identity(x.cols(), x.cols())).ldlt().solve(x.transpose() * y);
  const double resid_sd = std::sqrt(std::max((y - x * beta0).squaredNorm() / static_cast<double>(y.size()), 1e-6));
  Vector start(x.cols() + 1);
  start << beta0, std::log(resid_sd);

  SamplerConfig second_config = config;
  second_config.seed = mix_seed(config.seed, 0x5eedULL);
  RunOptions run2;
  run2.workers = options.workers;
  run2.inits.assign(static_cast<std::size_t>(config.chains), start);
  run2.summary_names = fit.names;
  const RunResult second = run_chains(outcome, second_config, run2);

  const auto p = static_cast<Eigen::Index>(fit.names.size());
  fit.estimate.resize(p);
  fit.std_error.resize(p);
  fit.lower.resize(p);
  fit.upper.resize(p);
  fit.rhat.resize(p);
  fit.ess_bulk.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& s = second.summary.at(fit.names[static_cast<std::size_t>(j)]);
    fit.estimate[j] = s.mean;
    fit.std_error[j] = s.sd;
    fit.lower[j] = s.q025;
    fit.upper[j] = s.q975;
    fit.rhat[j] = s.rhat;
    fit.ess_bulk[j] = s.ess_bulk;
  }
  return fit;
}

}  // namespace varjm
