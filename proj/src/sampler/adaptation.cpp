#include "varjm/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace varjm {

StepsizeAdapter::StepsizeAdapter(double target_accept, double gamma, double t0, double kappa)
    : delta_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {}

void StepsizeAdapter::restart(double stepsize) {
  mu_ = std::log(10.0 * stepsize);
  s_bar_ = 0.0;
  x_bar_ = 0.0;
  counter_ = 0;
}

double StepsizeAdapter::update(double accept_stat) {
  ++counter_;
  accept_stat = std::min(1.0, accept_stat);
  const double n = counter_;
  const double eta = 1.0 / (n + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(n) / gamma_;
  const double x_eta = std::pow(n, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

double StepsizeAdapter::final_stepsize() const { return std::exp(x_bar_); }

VarianceEstimator::VarianceEstimator(int dim) : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

void VarianceEstimator::add(const Vector& x) {
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / n_;
  m2_ += delta.cwiseProduct(x - mean_);
}

void VarianceEstimator::reset() {
  n_ = 0;
  mean_.setZero();
  m2_.setZero();
}

Vector VarianceEstimator::regularized_variance() const {
  const double n = n_;
  Vector var = n_ > 1 ? Vector(m2_ / (n - 1.0)) : Vector(Vector::Ones(mean_.size()));
  var = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
  return var.cwiseMax(1e-10);
}

WarmupSchedule::WarmupSchedule(int warmup) {
  int init_buffer = 75, term_buffer = 50, base_window = 25;
  if (warmup < 20) {
    term_start_ = warmup;
    init_buffer_ = warmup;
    return;
  }
  if (init_buffer + base_window + term_buffer > warmup) {
    init_buffer = static_cast<int>(0.15 * warmup);
    term_buffer = static_cast<int>(0.1 * warmup);
    base_window = warmup - (init_buffer + term_buffer);
  }
  init_buffer_ = init_buffer;
  term_start_ = warmup - term_buffer;
  int start = init_buffer;
  int size = base_window;
  while (start < term_start_) {
    int end = start + size;
    // A window that would leave less than twice its successor's size before
    // the terminal buffer absorbs the remainder.
    if (end + 2 * size > term_start_) end = term_start_;
    ends_.push_back(end - 1);
    start = end;
    size *= 2;
  }
}

bool WarmupSchedule::in_slow_window(int iteration) const {
  return iteration >= init_buffer_ && iteration < term_start_;
}

bool WarmupSchedule::is_window_end(int iteration) const {
  return std::find(ends_.begin(), ends_.end(), iteration) != ends_.end();
}

}  // namespace varjm
