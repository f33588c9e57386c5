#include "varjm/baselines.hpp"

#include <cmath>
#include <random>

namespace varjm {

std::pair<double, double> griliches_bias(double beta1, double beta2, double lambda1, double lambda2, double rho) {
  if (!(std::abs(rho) < 1.0)) throw BaselineError("griliches_bias needs |rho| < 1, got " + std::to_string(rho));
  if (lambda1 < 0.0 || lambda2 < 0.0) throw BaselineError("griliches_bias needs non-negative lambdas");
  const double denom = 1.0 - rho * rho;
  return {(-beta1 * lambda1 + beta2 * lambda2 * rho) / denom, (-beta2 * lambda2 + beta1 * lambda1 * rho) / denom};
}

std::pair<double, double> measurement_error_ols_bias(double beta1, double beta2, double lambda1, double lambda2,
                                                     double rho, std::size_t n, std::uint64_t seed) {
  // Truth covariance is the observed one minus the error variances.
  Eigen::Matrix2d truth_cov;
  truth_cov << 1.0 - lambda1, rho, rho, 1.0 - lambda2;
  const Eigen::LLT<Eigen::Matrix2d> llt(truth_cov);
  if (llt.info() != Eigen::Success)
    throw BaselineError("error variances leave no valid covariance for the true regressors");
  const Eigen::Matrix2d chol = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
  Eigen::Vector3d xty = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d z(normal(rng), normal(rng));
    const Eigen::Vector2d x = chol * z;
    const double y = beta1 * x[0] + beta2 * x[1] + normal(rng);
    const Eigen::Vector3d obs(1.0, x[0] + std::sqrt(lambda1) * normal(rng), x[1] + std::sqrt(lambda2) * normal(rng));
    xtx += obs * obs.transpose();
    xty += obs * y;
  }
  const Eigen::Vector3d b = xtx.ldlt().solve(xty);
  return {b[1] - beta1, b[2] - beta2};
}

}  // namespace varjm
