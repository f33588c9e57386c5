#include "varjm/model.hpp"

#include <cmath>
#include <regex>

namespace varjm {

std::string to_string(OutcomeFamily family) {
  return family == OutcomeFamily::Gaussian ? "gaussian" : "scale_mixture_2";
}

OutcomeFamily parse_outcome_family(const std::string& text) {
  if (text == "gaussian") return OutcomeFamily::Gaussian;
  if (text == "scale_mixture_2") return OutcomeFamily::ScaleMixture2;
  throw ModelError("unknown outcome family '" + text + "' (expected gaussian or scale_mixture_2)");
}

std::string to_string(Parameterization p) {
  return p == Parameterization::NonCentered ? "non_centered" : "centered";
}

Parameterization parse_parameterization(const std::string& text) {
  if (text == "non_centered") return Parameterization::NonCentered;
  if (text == "centered") return Parameterization::Centered;
  throw ModelError("unknown parameterization '" + text + "' (expected non_centered or centered)");
}

void Hyperparameters::validate() const {
  const std::pair<const char*, double> positive[] = {
      {"xi", xi},     {"tau", tau},   {"kappa", kappa}, {"kappa_prime", kappa_prime}, {"tau0", tau0},
      {"zeta", zeta}, {"tau1", tau1}, {"tau2", tau2},   {"coef_sd", coef_sd}};
  for (const auto& [name, value] : positive) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ModelError(std::string("hyperparameter ") + name + " must be positive and finite");
    }
  }
  if (!std::isfinite(m)) throw ModelError("hyperparameter m must be finite");
}

Feature Feature::parse(const std::string& name) {
  static const std::regex two_index(R"(([bsr])([1-9])([1-9]))");
  static const std::regex covariate(R"(w([1-9][0-9]*))");
  static const std::regex interaction(R"(s([1-9])([1-9])\*s([1-9])([1-9]))");
  std::smatch m;
  Feature f;
  if (std::regex_match(name, m, two_index)) {
    const int i = std::stoi(m[2]) - 1;
    const int j = std::stoi(m[3]) - 1;
    const char kind = m[1].str()[0];
    if (kind == 'b') {
      if (j >= kBasisDim) throw ModelError("feature '" + name + "': basis index must be 1 or 2");
      f.kind = FeatureKind::Coefficient;
    } else if (kind == 's') {
      if (i > j) throw ModelError("feature '" + name + "': write covariances as s{k}{l} with k < l");
      f.kind = i == j ? FeatureKind::Variance : FeatureKind::Covariance;
    } else {
      if (i >= j) throw ModelError("feature '" + name + "': write correlations as r{k}{l} with k < l");
      f.kind = FeatureKind::Correlation;
    }
    f.a = i;
    f.b = j;
    return f;
  }
  if (std::regex_match(name, m, covariate)) {
    f.kind = FeatureKind::Covariate;
    f.a = std::stoi(m[1]) - 1;
    return f;
  }
  if (std::regex_match(name, m, interaction)) {
    const int k1 = std::stoi(m[1]) - 1, k2 = std::stoi(m[2]) - 1;
    const int l1 = std::stoi(m[3]) - 1, l2 = std::stoi(m[4]) - 1;
    if (k1 != k2 || l1 != l2) throw ModelError("feature '" + name + "': interactions must multiply two variances");
    f.kind = FeatureKind::Interaction;
    f.a = std::min(k1, l1);
    f.b = std::max(k1, l1);
    return f;
  }
  throw ModelError("unknown outcome feature '" + name + "'");
}

std::string Feature::name() const {
  const auto idx = [](int i, int j) { return std::to_string(i + 1) + std::to_string(j + 1); };
  switch (kind) {
    case FeatureKind::Coefficient: return "b" + idx(a, b);
    case FeatureKind::Variance:
    case FeatureKind::Covariance: return "s" + idx(a, b);
    case FeatureKind::Correlation: return "r" + idx(a, b);
    case FeatureKind::Covariate: return "w" + std::to_string(a + 1);
    case FeatureKind::Interaction: return "s" + idx(a, a) + "*s" + idx(b, b);
  }
  return {};
}

std::string Feature::coefficient_name() const {
  const auto idx = [](int i, int j) { return std::to_string(i + 1) + std::to_string(j + 1); };
  switch (kind) {
    case FeatureKind::Coefficient: return "alpha" + idx(a, b);
    case FeatureKind::Variance:
    case FeatureKind::Covariance: return "gamma" + idx(a, b);
    case FeatureKind::Correlation: return "gammaR" + idx(a, b);
    case FeatureKind::Covariate: return "gammaW" + std::to_string(a + 1);
    case FeatureKind::Interaction: return "gamma" + idx(a, a) + "x" + idx(b, b);
  }
  return {};
}

std::vector<Feature> ModelSpec::default_features(int num_markers, int num_covariates) {
  std::vector<Feature> out;
  for (int q = 0; q < num_markers; ++q) {
    for (int p = 0; p < kBasisDim; ++p) out.push_back({FeatureKind::Coefficient, q, p});
  }
  for (int l = 0; l < num_markers; ++l) {
    for (int k = 0; k <= l; ++k) {
      out.push_back({k == l ? FeatureKind::Variance : FeatureKind::Covariance, k, l});
    }
  }
  for (int m = 0; m < num_covariates; ++m) out.push_back({FeatureKind::Covariate, m, 0});
  return out;
}

ModelSpec ModelSpec::defaults(int num_markers, int num_covariates) {
  ModelSpec spec;
  spec.num_markers = num_markers;
  spec.num_covariates = num_covariates;
  spec.features = default_features(num_markers, num_covariates);
  return spec;
}

std::vector<std::string> ModelSpec::feature_names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name());
  return out;
}

std::vector<std::string> ModelSpec::coefficient_names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.coefficient_name());
  return out;
}

void ModelSpec::validate() const {
  if (num_markers < 1 || num_markers > 8) throw ModelError("number of markers must be between 1 and 8");
  if (num_covariates < 0) throw ModelError("negative covariate count");
  hyper.validate();
  if (!include_outcome) return;
  if (features.empty()) throw ModelError("outcome feature list is empty");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const bool marker_ok = f.kind == FeatureKind::Covariate
                               ? (f.a >= 0 && f.a < num_covariates)
                               : (f.a >= 0 && f.a < num_markers &&
                                  (f.kind == FeatureKind::Coefficient || f.b < num_markers));
    if (!marker_ok) {
      throw ModelError("feature '" + f.name() + "' refers to a marker or covariate that does not exist");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (features[j] == f) throw ModelError("feature '" + f.name() + "' listed twice");
    }
  }
}

Vector feature_vector(const std::vector<Feature>& features, const Matrix& coefficients,
                      const Matrix& covariance, const Vector& covariates) {
  Vector out(static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    double v = 0.0;
    switch (f.kind) {
      case FeatureKind::Coefficient: v = coefficients(f.a, f.b); break;
      case FeatureKind::Variance:
      case FeatureKind::Covariance: v = covariance(f.a, f.b); break;
      case FeatureKind::Correlation:
        v = covariance(f.a, f.b) / std::sqrt(covariance(f.a, f.a) * covariance(f.b, f.b));
        break;
      case FeatureKind::Covariate: v = covariates[f.a]; break;
      case FeatureKind::Interaction: v = covariance(f.a, f.a) * covariance(f.b, f.b); break;
    }
    out[static_cast<Eigen::Index>(j)] = v;
  }
  return out;
}

}  // namespace varjm
