#pragma once

#include "varjm/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace varjm {

/// A differentiable log density over an unconstrained real vector, plus the
/// map that turns a point into reportable (constrained) parameters.
class LogDensity {
 public:
  virtual ~LogDensity() = default;

  virtual int dim() const = 0;

  /// Log density up to a constant. May return -infinity.
  virtual double log_density(const Vector& u) const = 0;

  /// Log density and its gradient; `grad` is resized to dim().
  virtual double log_density_gradient(const Vector& u, Vector& grad) const = 0;

  /// Log density accumulated in extended precision where supported. Used
  /// as the finite-difference reference, whose error is dominated by
  /// rounding of large totals.
  virtual long double log_density_extended(const Vector& u) const { return log_density(u); }

  /// Names of the entries returned by constrain().
  virtual std::vector<std::string> parameter_names() const = 0;

  /// Reportable parameter values at `u`.
  virtual Vector constrain(const Vector& u) const = 0;
};

struct GradientAudit {
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  int points = 0;
};

/// Compares the analytic gradient with central differences of
/// log_density_extended at `points` points uniform on
/// [-half_width, half_width]^dim. Error per coordinate is
/// |analytic - fd| / max(1, |fd|).
GradientAudit audit_gradient(const LogDensity& target, int points, double half_width, std::uint64_t seed,
                             double step = 1e-5);

}  // namespace varjm
