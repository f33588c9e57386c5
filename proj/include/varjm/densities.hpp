#pragma once

#include "varjm/common.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>

namespace varjm::math {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return -softplus(-x); }

/// log(1 - tanh(u)^2) = log(4) - 2|u| - 2 log1p(exp(-2|u|)).
inline double log1m_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * std::numbers::ln2 - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
}

/// sech(u) = sqrt(1 - tanh(u)^2), accurate for large |u|.
inline double sech(double u) {
  const double e = std::exp(-std::abs(u));
  return 2.0 * e / (1.0 + e * e);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double lgamma(double x) { return boost::math::lgamma(x); }
inline double digamma(double x) { return boost::math::digamma(x); }

inline double log_beta_fn(double a, double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

inline double normal_lpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
}

/// Half-Cauchy(0, scale) on x > 0: log(2 / (pi * scale * (1 + (x/scale)^2))).
inline double half_cauchy_lpdf(double x, double scale) {
  if (x < 0.0) return kNegInf;
  const double z = x / scale;
  return std::log(2.0 / (kPi * scale)) - std::log1p(z * z);
}

/// d/dx of half_cauchy_lpdf.
inline double half_cauchy_dlpdf(double x, double scale) { return -2.0 * x / (scale * scale + x * x); }

inline double exponential_lpdf(double x, double rate) {
  if (x < 0.0) return kNegInf;
  return std::log(rate) - rate * x;
}

inline double beta_lpdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta_fn(a, b);
}

}  // namespace varjm::math
