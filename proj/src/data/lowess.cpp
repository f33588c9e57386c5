#include "varjm/csv.hpp"
#include "varjm/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace varjm {

double LowessResult::trend(double t) const {
  if (knots.empty()) return 0.0;
  if (t <= knots.front()) return fitted.front();
  if (t >= knots.back()) return fitted.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin());
  const auto lo = hi - 1;
  const double w = (t - knots[lo]) / (knots[hi] - knots[lo]);
  return (1.0 - w) * fitted[lo] + w * fitted[hi];
}

LowessResult lowess_detrend(std::span<const double> times, std::span<const double> values,
                            double span) {
  const std::size_t n = times.size();
  if (values.size() != n) throw DataError("lowess: times and values differ in length");
  if (n < 10) throw DataError("lowess: need at least 10 points, got " + std::to_string(n));
  if (!(span > 0.0 && span <= 1.0)) throw DataError("lowess: span must lie in (0, 1]");
  const auto neighbours = static_cast<std::size_t>(std::floor(span * static_cast<double>(n) + 1e-7));
  if (neighbours < 3) {
    throw DataError("lowess: span * n = " + csv::format_double(span * static_cast<double>(n)) +
                    " leaves fewer than 3 points per local fit");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = times[order[i]];
    ys[i] = values[order[i]];
  }

  LowessResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || xs[i] != xs[i - 1]) result.knots.push_back(xs[i]);
  }
  result.fitted.reserve(result.knots.size());

  for (const double x0 : result.knots) {
    // Grow a window [lo, hi) around x0 until it holds the nearest neighbours.
    auto lo = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x0) - xs.begin());
    std::size_t hi = lo;
    while (hi - lo < neighbours) {
      if (lo == 0) {
        ++hi;
      } else if (hi == n) {
        --lo;
      } else if (x0 - xs[lo - 1] <= xs[hi] - x0) {
        --lo;
      } else {
        ++hi;
      }
    }
    const double h = std::max(x0 - xs[lo], xs[hi - 1] - x0);
    if (!(h > 0.0)) {
      throw DataError("lowess: degenerate local design at t=" + csv::format_double(x0) +
                      " (all neighbouring times identical)");
    }

    double sw = 0.0, swx = 0.0, swy = 0.0;
    std::vector<double> w(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) {
      const double u = std::abs(xs[k] - x0) / h;
      const double c = u < 1.0 ? 1.0 - u * u * u : 0.0;
      w[k - lo] = c * c * c;
      sw += w[k - lo];
      swx += w[k - lo] * xs[k];
      swy += w[k - lo] * ys[k];
    }
    const double xbar = swx / sw;
    const double ybar = swy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double dx = xs[k] - xbar;
      sxx += w[k - lo] * dx * dx;
      sxy += w[k - lo] * dx * (ys[k] - ybar);
    }
    if (!(sxx > 1e-12 * h * h * sw)) {
      throw DataError("lowess: degenerate local design at t=" + csv::format_double(x0) +
                      " (all weighted neighbour times identical)");
    }
    result.fitted.push_back(ybar + sxy / sxx * (x0 - xbar));
  }

  result.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(
        std::lower_bound(result.knots.begin(), result.knots.end(), times[i]) - result.knots.begin());
    result.residuals[i] = values[i] - result.fitted[k];
  }
  return result;
}

}  // namespace varjm
