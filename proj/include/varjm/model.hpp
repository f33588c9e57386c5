#pragma once

#include "varjm/common.hpp"
#include "varjm/data.hpp"
#include "varjm/log_density.hpp"

#include <optional>
#include <string>
#include <vector>

namespace varjm {

enum class OutcomeFamily { Gaussian, ScaleMixture2 };
enum class Parameterization { NonCentered, Centered };

std::string to_string(OutcomeFamily family);
OutcomeFamily parse_outcome_family(const std::string& text);
std::string to_string(Parameterization p);
Parameterization parse_parameterization(const std::string& text);

/// Fixed prior constants.
struct Hyperparameters {
  double m = 0.0;             // prior mean of beta and nu
  double xi = 10.0;           // prior sd of beta and nu
  double tau = 2.5;           // half-Cauchy scale of psi
  double kappa = 0.1;         // Exp rate of a'
  double kappa_prime = 0.1;   // Exp rate of b'
  double tau0 = 2.5;          // half-Cauchy scale of k
  double zeta = 1.0;          // LKJ shape of the random-effect correlation
  double tau1 = 2.5;          // half-Cauchy scale of sigma (and sigma1)
  double tau2 = 5.0;          // half-Cauchy scale of sigma2 in the mixture
  double coef_sd = 10.0;      // prior sd of outcome coefficients

  void validate() const;
};

enum class FeatureKind { Coefficient, Variance, Covariance, Correlation, Covariate, Interaction };

/// One outcome-regression feature. Marker and basis indices are zero-based.
///   Coefficient  b{q}{p}      -> b_iqp             (a = q, b = p)
///   Variance     s{k}{k}      -> d_ik^2            (a = b = k)
///   Covariance   s{k}{l}      -> d_ik d_il r_ikl   (a = k < b = l)
///   Correlation  r{k}{l}      -> r_ikl             (a = k < b = l)
///   Covariate    w{m}         -> W_im              (a = m)
///   Interaction  s{k}{k}*s{l}{l} -> d_ik^2 d_il^2  (a = k <= b = l)
struct Feature {
  FeatureKind kind = FeatureKind::Coefficient;
  int a = 0;
  int b = 0;

  static Feature parse(const std::string& name);
  std::string name() const;
  std::string coefficient_name() const;
  bool operator==(const Feature&) const = default;
};

struct ModelSpec {
  int num_markers = 2;
  int num_covariates = 0;
  std::vector<Feature> features;
  OutcomeFamily family = OutcomeFamily::Gaussian;
  Parameterization parameterization = Parameterization::NonCentered;
  Hyperparameters hyper;
  bool include_outcome = true;

  /// All b{q}{p}, then s{k}{l} for l = 1..Q, k = 1..l, then w{m}.
  static std::vector<Feature> default_features(int num_markers, int num_covariates);
  static ModelSpec defaults(int num_markers, int num_covariates);

  std::vector<std::string> feature_names() const;
  std::vector<std::string> coefficient_names() const;

  /// Throws ModelError when indices are out of range or constants invalid.
  void validate() const;
};

/// Evaluates the feature list for one subject from its coefficient matrix
/// (Q x 2), residual covariance (Q x Q) and covariates.
Vector feature_vector(const std::vector<Feature>& features, const Matrix& coefficients,
                      const Matrix& covariance, const Vector& covariates);

// ---------------------------------------------------------------------------
// Constrained parameter state

struct SubjectState {
  Matrix b;                    // Q x 2
  Vector log_sd;               // Q
  std::vector<double> corr;    // Q = 2: {r}; Q >= 3: hyperspherical angles

  Matrix correlation() const;
  Matrix covariance() const;
};

struct PopulationState {
  Matrix beta;      // Q x 2
  Matrix k;         // Q x 2, random-effect scales
  Vector rho;       // Q, random-effect intercept/slope correlation
  Vector nu;        // Q
  Vector psi;       // Q
  Vector a_prime;   // Q(Q-1)/2
  Vector b_prime;   // Q(Q-1)/2

  /// 2 x 2 covariance of (b_iq1, b_iq2).
  Matrix random_effect_cov(int q) const;
};

struct OutcomeState {
  Vector coef;
  double sigma = 1.0;    // Gaussian family
  double sigma1 = 1.0;   // mixture, smaller scale
  double sigma2 = 2.0;   // mixture, larger scale
  double pi_mix = 0.5;   // mixture weight of the sigma1 component
};

struct ParameterState {
  std::vector<SubjectState> subjects;
  PopulationState population;
  OutcomeState outcome;
};

/// Index map of the unconstrained vector. Subjects come first; within a
/// subject: 2Q coefficient coordinates (z in the non-centered form, b in the
/// centered form, ordered q-major), Q log-sds, then Q(Q-1)/2 correlation
/// coordinates. The population block holds, per marker, beta_q1, beta_q2,
/// log k_q1, log k_q2, atanh rho_q, nu_q, log psi_q, and per marker pair
/// log a', log b'. The outcome block holds the regression coefficients and
/// log sigma, or log sigma1, log(sigma2 - sigma1), logit pi for the mixture.
class ParameterLayout {
 public:
  ParameterLayout(const ModelSpec& spec, std::size_t num_subjects);

  int num_markers() const { return q_; }
  int num_pairs() const { return pairs_; }
  int subject_block() const { return subject_block_; }
  int subject_offset(std::size_t i) const { return static_cast<int>(i) * subject_block_; }
  int coef_index(std::size_t i, int q, int p) const { return subject_offset(i) + q * kBasisDim + p; }
  int log_sd_index(std::size_t i, int q) const { return subject_offset(i) + kBasisDim * q_ + q; }
  int corr_index(std::size_t i, int pair) const { return subject_offset(i) + (kBasisDim + 1) * q_ + pair; }

  static constexpr int kPopFields = 7;
  int population_offset() const { return population_offset_; }
  int pop_index(int q, int field) const { return population_offset_ + kPopFields * q + field; }
  int a_prime_index(int pair) const { return population_offset_ + kPopFields * q_ + 2 * pair; }
  int b_prime_index(int pair) const { return a_prime_index(pair) + 1; }

  int outcome_offset() const { return outcome_offset_; }
  int num_coefficients() const { return num_coef_; }
  int coef_param_index(int j) const { return outcome_offset_ + j; }
  int scale_index(int j) const { return outcome_offset_ + num_coef_ + j; }

  int dim() const { return dim_; }
  std::size_t num_subjects() const { return n_; }

 private:
  std::size_t n_;
  int q_;
  int pairs_;
  int subject_block_;
  int population_offset_;
  int outcome_offset_;
  int num_coef_;
  int dim_;
};

/// Population-block field offsets within a marker's group.
enum PopField { kBeta0 = 0, kBeta1, kLogK0, kLogK1, kAtanhRho, kNu, kLogPsi };

/// Unconstrained -> constrained map with the log absolute Jacobian of the
/// map to the quantities the component densities are written in (b, log-sd,
/// r or cos(theta), and the natural population/outcome parameters).
ParameterState transform_to_constrained(const Vector& u, const ModelSpec& spec,
                                        const ParameterLayout& layout, double* log_jacobian = nullptr);

/// Inverse of transform_to_constrained.
Vector transform_to_unconstrained(const ParameterState& state, const ModelSpec& spec,
                                  const ParameterLayout& layout);

/// Flat reportable vector: b, sd, correlations per subject; population
/// block; outcome block. Names from constrained_names().
Vector constrained_flat(const ParameterState& state, const ModelSpec& spec);
ParameterState state_from_constrained(const Vector& flat, const ModelSpec& spec, std::size_t num_subjects);
std::vector<std::string> constrained_names(const ModelSpec& spec, const Dataset& data);
std::vector<std::string> unconstrained_names(const ModelSpec& spec, const Dataset& data);

/// Starting point from per-subject least squares and moment estimates.
ParameterState initial_state_from_data(const Dataset& data, const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Log-density components (dense reference implementation)

double loglik_markers(const ParameterState& state, const Dataset& data);
double logprior_subject_effects(const ParameterState& state, const ModelSpec& spec);
double logprior_population(const ParameterState& state, const ModelSpec& spec);
double loglik_outcome(const ParameterState& state, const Dataset& data, const ModelSpec& spec);

/// Linear predictor of each subject's outcome.
Vector outcome_eta(const ParameterState& state, const Dataset& data, const ModelSpec& spec);

/// Posterior probability that each subject belongs to the sigma1 component.
Vector membership_probabilities(const ParameterState& state, const Dataset& data, const ModelSpec& spec);

// ---------------------------------------------------------------------------

/// Log posterior of the joint model with an analytic gradient.
class JointModel final : public LogDensity {
 public:
  JointModel(const Dataset& data, ModelSpec spec);

  int dim() const override { return layout_.dim(); }
  double log_density(const Vector& u) const override;
  double log_density_gradient(const Vector& u, Vector& grad) const override;
  long double log_density_extended(const Vector& u) const override;
  std::vector<std::string> parameter_names() const override;
  Vector constrain(const Vector& u) const override;

  const ModelSpec& spec() const { return spec_; }
  const ParameterLayout& layout() const { return layout_; }
  const Dataset& data() const { return data_; }

  ParameterState state(const Vector& u, double* log_jacobian = nullptr) const;
  Vector unconstrain(const ParameterState& state) const;

 private:
  struct SubjectStats {
    double n, st, stt;
    Matrix sxx;  // sum x x^T
    Vector sx;   // sum x
    Vector stx;  // sum t x
  };

  long double evaluate(const Vector& u, Vector* grad) const;
  template <int QT>
  long double evaluate_fixed(const Vector& u, Vector* grad) const;

  Dataset data_;
  ModelSpec spec_;
  ParameterLayout layout_;
  std::vector<SubjectStats> stats_;
  std::vector<std::string> names_;
};

}  // namespace varjm
