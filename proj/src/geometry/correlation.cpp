#include "varjm/correlation.hpp"

#include "varjm/densities.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace varjm {

int angle_index(int k, int l, int q) {
  // Pairs (0,1), (0,2), ..., (0,q-1), (1,2), ...
  return k * q - k * (k + 1) / 2 + (l - k - 1);
}

std::pair<int, int> angle_pair(int index, int q) {
  for (int k = 0; k < q - 1; ++k) {
    const int row_len = q - 1 - k;
    if (index < row_len) return {k, k + 1 + index};
    index -= row_len;
  }
  throw GeometryError("angle index out of range");
}

Matrix angles_to_cholesky(std::span<const double> angles, int q) {
  if (static_cast<int>(angles.size()) != num_angles(q)) {
    throw GeometryError("expected " + std::to_string(num_angles(q)) + " angles for Q=" + std::to_string(q));
  }
  Matrix chol = Matrix::Zero(q, q);
  chol(0, 0) = 1.0;
  for (int l = 1; l < q; ++l) {
    double prefix = 1.0;  // product of sines of the angles before column k
    for (int k = 0; k < l; ++k) {
      const double theta = angles[static_cast<std::size_t>(angle_index(k, l, q))];
      chol(l, k) = std::cos(theta) * prefix;
      prefix *= std::sin(theta);
    }
    chol(l, l) = prefix;
  }
  return chol;
}

Matrix angles_to_corr(std::span<const double> angles, int q) {
  const Matrix chol = angles_to_cholesky(angles, q);
  Matrix corr = chol * chol.transpose();
  corr.diagonal().setOnes();
  return corr;
}

std::vector<double> corr_to_angles(const Matrix& corr) {
  const auto q = static_cast<int>(corr.rows());
  if (corr.cols() != q || q < 2) throw GeometryError("correlation matrix must be square with Q >= 2");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(corr, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig >= 1e-12)) {
    std::ostringstream msg;
    msg << "correlation matrix is not positive definite (min eigenvalue " << min_eig << ")";
    throw GeometryError(msg.str());
  }
  const Eigen::LLT<Matrix> llt(corr);
  const Matrix chol = llt.matrixL();
  std::vector<double> angles(static_cast<std::size_t>(num_angles(q)));
  for (int l = 1; l < q; ++l) {
    // Normalize the row so the implied diagonal is consistent with unit norm.
    const double norm = chol.row(l).norm();
    double prefix = 1.0;
    for (int k = 0; k < l; ++k) {
      const double c = std::clamp(chol(l, k) / norm / prefix, -1.0, 1.0);
      const double theta = std::acos(c);
      angles[static_cast<std::size_t>(angle_index(k, l, q))] = theta;
      prefix *= std::sin(theta);
    }
  }
  return angles;
}

void cholesky_angles_backprop(std::span<const double> angles, int q, const Eigen::Ref<const Matrix>& grad_chol,
                              std::span<double> grad_angles) {
  std::vector<double> s(static_cast<std::size_t>(q)), c(static_cast<std::size_t>(q)),
      prefix(static_cast<std::size_t>(q) + 1);
  for (int l = 1; l < q; ++l) {
    prefix[0] = 1.0;
    for (int k = 0; k < l; ++k) {
      const double theta = angles[static_cast<std::size_t>(angle_index(k, l, q))];
      s[k] = std::sin(theta);
      c[k] = std::cos(theta);
      prefix[k + 1] = prefix[k] * s[k];
    }
    for (int m = 0; m < l; ++m) {
      // Entry (l, m) depends on theta_m through its cosine.
      double g = -grad_chol(l, m) * s[m] * prefix[m];
      // Later entries depend on theta_m through sin(theta_m).
      double excl = prefix[m];  // product of sines before k, skipping m
      for (int k = m + 1; k <= l; ++k) {
        const double lead = k < l ? c[k] : 1.0;
        g += grad_chol(l, k) * lead * c[m] * excl;
        if (k < l) excl *= s[k];
      }
      grad_angles[static_cast<std::size_t>(angle_index(m, l, q))] += g;
    }
  }
}

double log_beta_on_interval(double r, double a, double b) {
  if (!(r > -1.0 && r < 1.0)) return math::kNegInf;
  const double x = 0.5 * (r + 1.0);
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log(0.5 * (1.0 - r)) - math::log_beta_fn(a, b) -
         std::numbers::ln2;
}

double log_lkj(const Matrix& corr, double zeta) {
  const Eigen::LLT<Matrix> llt(corr);
  if (llt.info() != Eigen::Success) return math::kNegInf;
  const Matrix chol = llt.matrixL();
  const double logdet = 2.0 * chol.diagonal().array().log().sum();
  if (!std::isfinite(logdet)) return math::kNegInf;
  return (zeta - 1.0) * logdet;
}

double angle_transform_logdet(std::span<const double> unconstrained) {
  double total = 0.0;
  for (const double u : unconstrained) {
    total += std::log(kPi) + math::log_sigmoid(u) + math::log_sigmoid(-u);
  }
  return total;
}

double log_beta_angle_density(double log_cos_half, double log_sin_half, double a, double b) {
  return (2.0 * a - 1.0) * log_cos_half + (2.0 * b - 1.0) * log_sin_half - math::log_beta_fn(a, b);
}

double lkj_angle_log_density(std::span<const double> angles, int q, double zeta) {
  double total = 0.0;
  for (int idx = 0; idx < num_angles(q); ++idx) {
    const auto [k, l] = angle_pair(idx, q);
    const double shape = zeta + 0.5 * (q - 2 - k);
    const double half = 0.5 * angles[static_cast<std::size_t>(idx)];
    total += log_beta_angle_density(std::log(std::cos(half)), std::log(std::sin(half)), shape, shape);
  }
  return total;
}

}  // namespace varjm
