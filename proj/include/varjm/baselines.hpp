#pragma once

#include "varjm/data.hpp"
#include "varjm/log_density.hpp"
#include "varjm/model.hpp"
#include "varjm/sampler.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace varjm {

/// Asymptotic OLS biases of (b1, b2) when both regressors carry classical
/// measurement error. lambda_k is the error variance as a fraction of the
/// observed regressor's variance and rho the correlation of the observed
/// regressors, which are taken to have equal variance.
std::pair<double, double> griliches_bias(double beta1, double beta2, double lambda1, double lambda2, double rho);

/// Monte Carlo counterpart of griliches_bias: draws n observed regressor
/// pairs with unit variance and correlation rho, splits each into truth
/// plus independent error with variance lambda_k, generates
/// Y = beta1 X1 + beta2 X2 + N(0, 1) from the truths and returns the OLS
/// bias (with intercept) of the regression on the observed values.
std::pair<double, double> measurement_error_ols_bias(double beta1, double beta2, double lambda1, double lambda2,
                                                     double rho, std::size_t n, std::uint64_t seed);

struct OlsFit {
  Vector coef;
  Vector std_error;
  Vector lower;   // t-based 95% interval
  Vector upper;
  double sigma = 0.0;
  int df = 0;
};

/// Ordinary least squares with classical standard errors. Throws
/// BaselineError, quoting the condition number, when the design is
/// numerically singular.
OlsFit ols(const Matrix& x, const Vector& y);

/// Subject-level summaries from the first stage.
struct StageOne {
  std::vector<Matrix> coefficients;  // Q x 2 per subject
  std::vector<Matrix> covariance;    // Q x Q per subject
};

/// Per-subject OLS of each marker on (1, t) with residual sample
/// variances and covariances (denominator n_i - 1).
StageOne subject_least_squares(const Dataset& data);

/// Sample covariance (denominator n_i - 1) of each subject's residuals
/// around the given coefficient matrices.
std::vector<Matrix> residual_covariances(const Dataset& data, const std::vector<Matrix>& coefficients);

struct TwoStageFit {
  std::string method;
  StageOne stage1;
  std::vector<std::string> names;  // outcome coefficient names
  Vector estimate;
  Vector std_error;                // classical SE, or posterior sd
  Vector lower;
  Vector upper;
  Vector rhat;                     // stage-2 diagnostics; empty for OLS
  Vector ess_bulk;
  std::vector<std::string> warnings;
};

Vector outcome_vector(const Dataset& data);

/// Stage-2 design: one row of spec.features per subject.
Matrix stage_two_design(const StageOne& stage1, const Dataset& data, const ModelSpec& spec);

TwoStageFit tslm(const Dataset& data, const ModelSpec& spec);

/// Bayesian multivariate linear mixed model: per-marker population
/// intercept/slope, subject random effects with per-marker 2 x 2
/// covariance (half-Cauchy scales, LKJ(1) correlation), and one residual
/// covariance shared by every subject (half-Cauchy scales, LKJ(1)
/// correlation). Random effects are non-centered.
class LinearMixedModel final : public LogDensity {
 public:
  struct Priors {
    double fixed_sd = 10.0;
    double scale_tau = 2.5;
    double lkj_shape = 1.0;
  };

  explicit LinearMixedModel(const Dataset& data);
  LinearMixedModel(const Dataset& data, Priors priors);

  int dim() const override { return dim_; }
  double log_density(const Vector& u) const override;
  double log_density_gradient(const Vector& u, Vector& grad) const override;
  std::vector<std::string> parameter_names() const override { return names_; }
  /// Subject coefficients (fixed + random), fixed effects, random-effect
  /// scales and correlations, residual sds, residual correlations.
  Vector constrain(const Vector& u) const override;

  int num_markers() const { return q_; }
  /// Unconstrained point whose subject coefficients equal `coefficients`
  /// and whose other parameters are moment estimates from them.
  Vector initial_point(const std::vector<Matrix>& coefficients) const;
  /// Subject coefficient matrices stored at the start of constrain().
  std::vector<Matrix> subject_coefficients(const Vector& constrained) const;

 private:
  double evaluate(const Vector& u, Vector* grad) const;

  struct Stats {
    double n;
    Matrix hh;    // 2 x 2, sum h h^T with h = (1, t)
    Matrix sxh;   // Q x 2, sum x h^T
    Matrix sxx;   // Q x Q
  };
  const Dataset& data_;
  Priors priors_;
  int q_;
  int n_;
  int dim_;
  int pop_offset_;
  int resid_offset_;
  double total_obs_;
  std::vector<Stats> stats_;
  std::vector<std::string> names_;
};

struct BaselineRunOptions {
  int workers = 1;
  /// Stage-1 starting points for the chains (empty for random starts).
  std::vector<Vector> inits;
};

TwoStageFit tslmm(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                  const BaselineRunOptions& options = {});

/// Gaussian linear regression with N(0, coef_sd^2) coefficients and a
/// half-Cauchy(0, tau) residual sd; parameters are the coefficients and
/// log sigma.
class BayesianLinearRegression final : public LogDensity {
 public:
  BayesianLinearRegression(Matrix x, Vector y, std::vector<std::string> names, double coef_sd, double tau);

  int dim() const override { return static_cast<int>(x_.cols()) + 1; }
  double log_density(const Vector& u) const override;
  double log_density_gradient(const Vector& u, Vector& grad) const override;
  std::vector<std::string> parameter_names() const override;
  Vector constrain(const Vector& u) const override;

 private:
  Matrix x_;
  Vector y_;
  Matrix xtx_;
  Vector xty_;
  double yty_;
  std::vector<std::string> names_;
  double coef_sd_, tau_;
};

/// Stage 1 fits the marker submodel alone; stage 2 fits the Bayesian
/// outcome regression on posterior-mean subject coefficients and
/// covariances. `options.inits` apply to stage 1.
TwoStageFit tsiv(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                 const BaselineRunOptions& options = {});

/// Posterior means of each subject's coefficient matrix and residual
/// covariance from marker-model draws (constrained rows).
StageOne posterior_mean_stage_one(const std::vector<ChainOutput>& chains, const ModelSpec& spec,
                                  std::size_t num_subjects);

void write_two_stage_csv(const std::string& path, const TwoStageFit& fit);

}  // namespace varjm
