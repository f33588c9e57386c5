#pragma once

#include "varjm/data.hpp"
#include "varjm/log_density.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace varjm::testing {

/// Random longitudinal dataset with unit-spaced times and O(1) values.
inline Dataset random_dataset(int n, int q, int d, int min_obs, int max_obs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> nobs(min_obs, max_obs);
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < n; ++i) {
    SubjectRecord s;
    s.id = std::to_string(i + 1);
    const int ni = nobs(rng);
    s.markers.resize(ni, q);
    for (int j = 0; j < ni; ++j) {
      s.times.push_back(j);
      for (int k = 0; k < q; ++k) s.markers(j, k) = 0.5 * j * (k + 1) + normal(rng);
    }
    s.covariates.resize(d);
    for (int k = 0; k < d; ++k) s.covariates[k] = normal(rng);
    s.outcome = 3.0 * normal(rng);
    subjects.push_back(std::move(s));
  }
  return Dataset(std::move(subjects), q, d);
}

/// Largest |analytic - central difference| / max(1, |central difference|).
inline double max_gradient_error(const LogDensity& target, const Vector& u, double h = 1e-5) {
  Vector grad;
  target.log_density_gradient(u, grad);
  double worst = 0.0;
  Vector x = u;
  for (int k = 0; k < target.dim(); ++k) {
    x[k] = u[k] + h;
    const long double up = target.log_density_extended(x);
    x[k] = u[k] - h;
    const long double down = target.log_density_extended(x);
    x[k] = u[k];
    const auto fd = static_cast<double>((up - down) / (2.0L * h));
    worst = std::max(worst, std::abs(grad[k] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

inline Vector uniform_point(int dim, double half_width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-half_width, half_width);
  Vector u(dim);
  for (int k = 0; k < dim; ++k) u[k] = unif(rng);
  return u;
}

/// Independent normals with the given scales.
class DiagonalGaussian : public LogDensity {
 public:
  explicit DiagonalGaussian(Vector scales) : scales_(std::move(scales)) {}
  int dim() const override { return static_cast<int>(scales_.size()); }
  double log_density(const Vector& u) const override {
    return -0.5 * u.cwiseQuotient(scales_).squaredNorm();
  }
  double log_density_gradient(const Vector& u, Vector& grad) const override {
    grad = -u.cwiseQuotient(scales_.cwiseAbs2());
    return log_density(u);
  }
  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names;
    for (int k = 0; k < dim(); ++k) names.push_back("x" + std::to_string(k + 1));
    return names;
  }
  Vector constrain(const Vector& u) const override { return u; }

 private:
  Vector scales_;
};

/// Bivariate normal with unit variances and correlation rho.
class CorrelatedGaussian : public LogDensity {
 public:
  explicit CorrelatedGaussian(double rho) : rho_(rho) {}
  int dim() const override { return 2; }
  double log_density(const Vector& u) const override {
    return -0.5 * (u[0] * u[0] - 2 * rho_ * u[0] * u[1] + u[1] * u[1]) / (1 - rho_ * rho_);
  }
  double log_density_gradient(const Vector& u, Vector& grad) const override {
    grad.resize(2);
    grad[0] = -(u[0] - rho_ * u[1]) / (1 - rho_ * rho_);
    grad[1] = -(u[1] - rho_ * u[0]) / (1 - rho_ * rho_);
    return log_density(u);
  }
  std::vector<std::string> parameter_names() const override { return {"x1", "x2"}; }
  Vector constrain(const Vector& u) const override { return u; }

 private:
  double rho_;
};

/// Neal's funnel in non-centered coordinates: v ~ N(0, 3^2), z ~ N(0, I);
/// constrain() reports v and x = exp(v / 2) z.
class NonCenteredFunnel : public LogDensity {
 public:
  explicit NonCenteredFunnel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  double log_density(const Vector& u) const override {
    return -0.5 * u[0] * u[0] / 9.0 - 0.5 * u.tail(dim_ - 1).squaredNorm();
  }
  double log_density_gradient(const Vector& u, Vector& grad) const override {
    grad = -u;
    grad[0] = -u[0] / 9.0;
    return log_density(u);
  }
  std::vector<std::string> parameter_names() const override {
    std::vector<std::string> names{"v"};
    for (int k = 1; k < dim_; ++k) names.push_back("x" + std::to_string(k));
    return names;
  }
  Vector constrain(const Vector& u) const override {
    Vector x = u;
    x.tail(dim_ - 1) *= std::exp(u[0] / 2);
    return x;
  }

 private:
  int dim_;
};

/// Largest distance between the empirical CDF of `x` and the N(0, 1) CDF.
inline double ks_standard_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    worst = std::max({worst, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return worst;
}

}  // namespace varjm::testing
