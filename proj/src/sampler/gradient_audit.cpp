#include "varjm/log_density.hpp"

#include <cmath>
#include <random>

namespace varjm {

GradientAudit audit_gradient(const LogDensity& target, int points, double half_width, std::uint64_t seed,
                             double step) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-half_width, half_width);
  GradientAudit audit;
  Vector u(target.dim()), grad;
  for (int p = 0; p < points; ++p) {
    for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = unif(rng);
    target.log_density_gradient(u, grad);
    Vector x = u;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      x[k] = u[k] + step;
      const long double up = target.log_density_extended(x);
      x[k] = u[k] - step;
      const long double down = target.log_density_extended(x);
      x[k] = u[k];
      const auto fd = static_cast<double>((up - down) / (2.0L * step));
      const double err = std::abs(grad[k] - fd) / std::max(1.0, std::abs(fd));
      if (!(err <= audit.max_rel_error)) {
        audit.max_rel_error = err;
        audit.worst_coordinate = static_cast<int>(k);
      }
    }
    ++audit.points;
  }
  return audit;
}

}  // namespace varjm
