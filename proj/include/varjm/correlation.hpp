#pragma once

#include "varjm/common.hpp"

#include <span>
#include <utility>
#include <vector>

namespace varjm {

/// Number of hyperspherical angles of a q x q correlation matrix.
constexpr int num_angles(int q) { return q * (q - 1) / 2; }

/// Position of the angle for marker pair (k, l), k < l, zero-based, in the
/// row-major strict-upper-triangle ordering theta_12, theta_13, ..., theta_23, ...
int angle_index(int k, int l, int q);

/// Inverse of angle_index: the (k, l) pair stored at position `index`.
std::pair<int, int> angle_pair(int index, int q);

/// Lower-triangular Cholesky factor of the correlation matrix built from
/// hyperspherical angles. The angle for pair (k, l) parameterizes entry
/// L(l, k): L(l, k) = cos(theta_kl) * prod_{m<k} sin(theta_ml), and the
/// diagonal L(l, l) is the product of all sines in row l.
Matrix angles_to_cholesky(std::span<const double> angles, int q);

/// Correlation matrix L * L^T; always positive definite for angles in (0, pi).
Matrix angles_to_corr(std::span<const double> angles, int q);

/// Principal-branch inverse of angles_to_corr. Throws GeometryError if the
/// smallest eigenvalue of `corr` is below 1e-12.
std::vector<double> corr_to_angles(const Matrix& corr);

/// Back-propagates d(objective)/dL (lower triangle of `grad_chol`) to the
/// angles, adding into `grad_angles`.
void cholesky_angles_backprop(std::span<const double> angles, int q, const Eigen::Ref<const Matrix>& grad_chol,
                              std::span<double> grad_angles);

/// Log density of r under 2 * Beta(a, b) - 1 on (-1, 1); -inf outside.
double log_beta_on_interval(double r, double a, double b);

/// Unnormalized LKJ log density (zeta - 1) * log det(corr); -inf if not PD.
double log_lkj(const Matrix& corr, double zeta);

/// Log-Jacobian of the elementwise map u -> pi * sigmoid(u).
double angle_transform_logdet(std::span<const double> unconstrained);

/// Log density, in angle coordinates, of theta when cos(theta) follows
/// 2 * Beta(a, b) - 1: log_beta_on_interval(cos theta) + log sin theta,
/// evaluated through the logs of cos(theta/2) and sin(theta/2) so it stays
/// accurate near 0 and pi.
double log_beta_angle_density(double log_cos_half, double log_sin_half, double a, double b);

/// Log density of a q x q correlation matrix under LKJ(zeta), expressed in
/// the hyperspherical angles (includes the angle Jacobian, up to a constant).
/// Each angle at Cholesky column k carries a symmetric Beta with shape
/// zeta + (q - 2 - k) / 2 on its cosine.
double lkj_angle_log_density(std::span<const double> angles, int q, double zeta);

}  // namespace varjm
