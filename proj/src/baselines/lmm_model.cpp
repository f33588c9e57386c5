#include "varjm/baselines.hpp"
#include "varjm/correlation.hpp"
#include "varjm/densities.hpp"

#include <cmath>

namespace varjm {

namespace {

constexpr int kPopFields = 5;  // beta0, beta1, log k0, log k1, atanh rho

std::string pair_name(int q, int idx) {
  const auto [k, l] = angle_pair(idx, q);
  return std::to_string(k + 1) + "." + std::to_string(l + 1);
}

}  // namespace

LinearMixedModel::LinearMixedModel(const Dataset& data) : LinearMixedModel(data, Priors{}) {}

LinearMixedModel::LinearMixedModel(const Dataset& data, Priors priors)
    : data_(data), priors_(priors), q_(data.num_markers()), n_(static_cast<int>(data.size())) {
  pop_offset_ = n_ * 2 * q_;
  resid_offset_ = pop_offset_ + kPopFields * q_;
  dim_ = resid_offset_ + q_ + num_angles(q_);
  total_obs_ = 0.0;
  for (const auto& s : data.subjects()) {
    Stats st;
    st.n = s.num_obs();
    total_obs_ += st.n;
    Matrix h(s.num_obs(), 2);
    for (int j = 0; j < s.num_obs(); ++j) {
      h(j, 0) = 1.0;
      h(j, 1) = s.times[static_cast<std::size_t>(j)];
    }
    st.hh = h.transpose() * h;
    st.sxh = s.markers.transpose() * h;
    st.sxx = s.markers.transpose() * s.markers;
    stats_.push_back(std::move(st));
  }
  for (const auto& s : data.subjects())
    for (int q = 0; q < q_; ++q)
      for (int p = 0; p < 2; ++p) names_.push_back("c." + s.id + "." + std::to_string(q + 1) + "." + std::to_string(p + 1));
  for (int q = 0; q < q_; ++q)
    for (int p = 0; p < 2; ++p) names_.push_back("beta." + std::to_string(q + 1) + "." + std::to_string(p + 1));
  for (int q = 0; q < q_; ++q)
    for (int p = 0; p < 2; ++p) names_.push_back("k." + std::to_string(q + 1) + "." + std::to_string(p + 1));
  for (int q = 0; q < q_; ++q) names_.push_back("rho." + std::to_string(q + 1));
  for (int q = 0; q < q_; ++q) names_.push_back("sigma_e." + std::to_string(q + 1));
  for (int k = 0; k < num_angles(q_); ++k) names_.push_back("r_e." + pair_name(q_, k));
}

double LinearMixedModel::log_density(const Vector& u) const { return evaluate(u, nullptr); }

double LinearMixedModel::log_density_gradient(const Vector& u, Vector& grad) const {
  grad.setZero(dim_);
  return evaluate(u, &grad);
}

double LinearMixedModel::evaluate(const Vector& u, Vector* grad) const {
  const double fixed_var = priors_.fixed_sd * priors_.fixed_sd;
  const double tau = priors_.scale_tau;
  const double zeta = priors_.lkj_shape;
  double lp = 0.0;

  Vector beta0(q_), beta1(q_), k0(q_), k1(q_), rho(q_), s(q_);
  for (int q = 0; q < q_; ++q) {
    const int o = pop_offset_ + kPopFields * q;
    beta0[q] = u[o];
    beta1[q] = u[o + 1];
    k0[q] = std::exp(u[o + 2]);
    k1[q] = std::exp(u[o + 3]);
    rho[q] = std::tanh(u[o + 4]);
    s[q] = std::sqrt((1.0 - rho[q]) * (1.0 + rho[q]));
    lp += -0.5 * (beta0[q] * beta0[q] + beta1[q] * beta1[q]) / fixed_var;
    lp += math::half_cauchy_lpdf(k0[q], tau) + u[o + 2] + math::half_cauchy_lpdf(k1[q], tau) + u[o + 3];
    lp += zeta * math::log1m_tanh_sq(u[o + 4]);
    if (grad) {
      (*grad)[o] += -beta0[q] / fixed_var;
      (*grad)[o + 1] += -beta1[q] / fixed_var;
      (*grad)[o + 2] += math::half_cauchy_dlpdf(k0[q], tau) * k0[q] + 1.0;
      (*grad)[o + 3] += math::half_cauchy_dlpdf(k1[q], tau) * k1[q] + 1.0;
      (*grad)[o + 4] += -2.0 * zeta * rho[q];
    }
  }

  const int num_k = num_angles(q_);
  Vector sig(q_);
  for (int q = 0; q < q_; ++q) sig[q] = std::exp(u[resid_offset_ + q]);
  std::vector<double> raw(static_cast<std::size_t>(num_k)), theta(raw.size());
  for (int k = 0; k < num_k; ++k) {
    raw[static_cast<std::size_t>(k)] = u[resid_offset_ + q_ + k];
    theta[static_cast<std::size_t>(k)] = kPi * math::sigmoid(raw[static_cast<std::size_t>(k)]);
  }
  const Matrix chol = angles_to_cholesky(theta, q_);
  const Matrix r = chol * chol.transpose();
  const Matrix cov = sig.asDiagonal() * r * sig.asDiagonal();
  const Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) return math::kNegInf;
  const Matrix cov_inv = llt.solve(Matrix::Identity(q_, q_));
  double logdet = 0.0;
  for (int q = 0; q < q_; ++q) logdet += 2.0 * std::log(llt.matrixLLT()(q, q));

  Matrix a_total = Matrix::Zero(q_, q_);
  Matrix c(q_, 2);
  for (int i = 0; i < n_; ++i) {
    const int zo = i * 2 * q_;
    for (int q = 0; q < q_; ++q) {
      const double z0 = u[zo + 2 * q], z1 = u[zo + 2 * q + 1];
      lp += -0.5 * (z0 * z0 + z1 * z1);
      c(q, 0) = beta0[q] + k0[q] * z0;
      c(q, 1) = beta1[q] + k1[q] * (rho[q] * z0 + s[q] * z1);
    }
    const Stats& st = stats_[static_cast<std::size_t>(i)];
    const Matrix csh = c * st.sxh.transpose();
    a_total += st.sxx - csh - csh.transpose() + c * st.hh * c.transpose();
    if (grad) {
      const Matrix gc = cov_inv * (st.sxh - c * st.hh);
      for (int q = 0; q < q_; ++q) {
        const double z0 = u[zo + 2 * q], z1 = u[zo + 2 * q + 1];
        const int o = pop_offset_ + kPopFields * q;
        (*grad)[zo + 2 * q] += gc(q, 0) * k0[q] + gc(q, 1) * k1[q] * rho[q] - z0;
        (*grad)[zo + 2 * q + 1] += gc(q, 1) * k1[q] * s[q] - z1;
        (*grad)[o] += gc(q, 0);
        (*grad)[o + 1] += gc(q, 1);
        (*grad)[o + 2] += gc(q, 0) * k0[q] * z0;
        (*grad)[o + 3] += gc(q, 1) * k1[q] * (rho[q] * z0 + s[q] * z1);
        (*grad)[o + 4] += gc(q, 1) * k1[q] * (z0 * s[q] - z1 * rho[q]) * s[q];
      }
    }
  }

  lp += -0.5 * total_obs_ * (q_ * kLog2Pi + logdet) - 0.5 * cov_inv.cwiseProduct(a_total).sum();
  for (int q = 0; q < q_; ++q) lp += math::half_cauchy_lpdf(sig[q], tau) + u[resid_offset_ + q];
  lp += lkj_angle_log_density(theta, q_, zeta) + angle_transform_logdet(raw);

  if (grad) {
    const Matrix g = -0.5 * total_obs_ * cov_inv + 0.5 * cov_inv * a_total * cov_inv;
    for (int k = 0; k < q_; ++k) {
      double d = 0.0;
      for (int l = 0; l < q_; ++l) d += 2.0 * g(k, l) * r(k, l) * sig[l];
      (*grad)[resid_offset_ + k] += d * sig[k] + math::half_cauchy_dlpdf(sig[k], tau) * sig[k] + 1.0;
    }
    if (num_k > 0) {
      const Matrix gr = sig.asDiagonal() * g * sig.asDiagonal();
      const Matrix gl = (2.0 * gr * chol).triangularView<Eigen::Lower>();
      std::vector<double> gtheta(raw.size(), 0.0);
      cholesky_angles_backprop(theta, q_, gl, gtheta);
      for (int idx = 0; idx < num_k; ++idx) {
        const auto col = angle_pair(idx, q_).first;
        const double shape = zeta + 0.5 * (q_ - 2 - col);
        const double t = theta[static_cast<std::size_t>(idx)];
        const double x = raw[static_cast<std::size_t>(idx)];
        const double dtheta = kPi * math::sigmoid(x) * math::sigmoid(-x);
        const double g_theta = gtheta[static_cast<std::size_t>(idx)] + (2.0 * shape - 1.0) * std::cos(t) / std::sin(t);
        (*grad)[resid_offset_ + q_ + idx] += g_theta * dtheta + math::sigmoid(-x) - math::sigmoid(x);
      }
    }
  }
  return std::isfinite(lp) ? lp : math::kNegInf;
}

Vector LinearMixedModel::constrain(const Vector& u) const {
  Vector out(static_cast<Eigen::Index>(names_.size()));
  Eigen::Index w = 0;
  for (int i = 0; i < n_; ++i) {
    const int zo = i * 2 * q_;
    for (int q = 0; q < q_; ++q) {
      const int o = pop_offset_ + kPopFields * q;
      const double rho = std::tanh(u[o + 4]);
      const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
      const double z0 = u[zo + 2 * q], z1 = u[zo + 2 * q + 1];
      out[w++] = u[o] + std::exp(u[o + 2]) * z0;
      out[w++] = u[o + 1] + std::exp(u[o + 3]) * (rho * z0 + s * z1);
    }
  }
  for (int q = 0; q < q_; ++q) {
    out[w++] = u[pop_offset_ + kPopFields * q];
    out[w++] = u[pop_offset_ + kPopFields * q + 1];
  }
  for (int q = 0; q < q_; ++q) {
    out[w++] = std::exp(u[pop_offset_ + kPopFields * q + 2]);
    out[w++] = std::exp(u[pop_offset_ + kPopFields * q + 3]);
  }
  for (int q = 0; q < q_; ++q) out[w++] = std::tanh(u[pop_offset_ + kPopFields * q + 4]);
  for (int q = 0; q < q_; ++q) out[w++] = std::exp(u[resid_offset_ + q]);
  const int num_k = num_angles(q_);
  if (num_k > 0) {
    std::vector<double> theta(static_cast<std::size_t>(num_k));
    for (int k = 0; k < num_k; ++k) theta[static_cast<std::size_t>(k)] = kPi * math::sigmoid(u[resid_offset_ + q_ + k]);
    const Matrix r = angles_to_corr(theta, q_);
    for (int k = 0; k < num_k; ++k) {
      const auto [a, b] = angle_pair(k, q_);
      out[w++] = r(a, b);
    }
  }
  return out;
}

std::vector<Matrix> LinearMixedModel::subject_coefficients(const Vector& constrained) const {
  std::vector<Matrix> out;
  for (int i = 0; i < n_; ++i) {
    Matrix c(q_, 2);
    for (int q = 0; q < q_; ++q)
      for (int p = 0; p < 2; ++p) c(q, p) = constrained[i * 2 * q_ + 2 * q + p];
    out.push_back(c);
  }
  return out;
}

Vector LinearMixedModel::initial_point(const std::vector<Matrix>& coefficients) const {
  Vector u = Vector::Zero(dim_);
  const double n = n_;
  for (int q = 0; q < q_; ++q) {
    double m0 = 0, m1 = 0;
    for (const auto& c : coefficients) {
      m0 += c(q, 0) / n;
      m1 += c(q, 1) / n;
    }
    double v0 = 0, v1 = 0, v01 = 0;
    for (const auto& c : coefficients) {
      v0 += (c(q, 0) - m0) * (c(q, 0) - m0) / (n - 1);
      v1 += (c(q, 1) - m1) * (c(q, 1) - m1) / (n - 1);
      v01 += (c(q, 0) - m0) * (c(q, 1) - m1) / (n - 1);
    }
    const double k0 = std::sqrt(std::max(v0, 0.01)), k1 = std::sqrt(std::max(v1, 0.01));
    const double rho = std::clamp(v01 / (k0 * k1), -0.9, 0.9);
    const double s = std::sqrt(1.0 - rho * rho);
    const int o = pop_offset_ + kPopFields * q;
    u[o] = m0;
    u[o + 1] = m1;
    u[o + 2] = std::log(k0);
    u[o + 3] = std::log(k1);
    u[o + 4] = std::atanh(rho);
    for (int i = 0; i < n_; ++i) {
      const auto& c = coefficients[static_cast<std::size_t>(i)];
      const double z0 = (c(q, 0) - m0) / k0;
      const double z1 = ((c(q, 1) - m1) / k1 - rho * z0) / s;
      u[i * 2 * q_ + 2 * q] = z0;
      u[i * 2 * q_ + 2 * q + 1] = z1;
    }
  }
  const auto covs = residual_covariances(data_, coefficients);
  Matrix pooled = Matrix::Zero(q_, q_);
  for (const auto& c : covs) pooled += c / n;
  Vector sd = pooled.diagonal().cwiseMax(1e-4).cwiseSqrt();
  for (int q = 0; q < q_; ++q) u[resid_offset_ + q] = std::log(sd[q]);
  if (q_ > 1) {
    Matrix corr = sd.cwiseInverse().asDiagonal() * pooled * sd.cwiseInverse().asDiagonal();
    corr = 0.5 * corr + 0.5 * Matrix::Identity(q_, q_);
    corr.diagonal().setOnes();
    const auto theta = corr_to_angles(corr);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double x = std::clamp(theta[k] / kPi, 1e-6, 1 - 1e-6);
      u[resid_offset_ + q_ + static_cast<int>(k)] = std::log(x / (1.0 - x));
    }
  }
  return u;
}

namespace {

std::vector<Matrix> mean_subject_coefficients(const LinearMixedModel& model, const std::vector<ChainOutput>& chains) {
  Vector mean = Vector::Zero(chains.front().draws.cols());
  double count = 0.0;
  for (const auto& c : chains) {
    mean += c.draws.colwise().sum().transpose();
    count += static_cast<double>(c.draws.rows());
  }
  return model.subject_coefficients(mean / count);
}

}  // namespace

TwoStageFit tslmm(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config,
                  const BaselineRunOptions& options) {
  const StageOne ls = subject_least_squares(data);
  const LinearMixedModel model(data);
  RunOptions run;
  run.workers = options.workers;
  run.inits = options.inits;
  if (run.inits.empty()) run.inits.assign(static_cast<std::size_t>(config.chains), model.initial_point(ls.coefficients));
  std::vector<std::string> fixed;
  for (int q = 0; q < model.num_markers(); ++q)
    for (int p = 0; p < 2; ++p) fixed.push_back("beta." + std::to_string(q + 1) + "." + std::to_string(p + 1));
  run.summary_names = fixed;
  const RunResult result = run_chains(model, config, run);

  TwoStageFit fit;
  fit.method = "tslmm";
  for (const auto& p : result.summary.parameters)
    if (p.rhat > 1.1) fit.warnings.push_back("stage 1: R-hat of " + p.name + " is " + std::to_string(p.rhat));
  fit.stage1.coefficients = mean_subject_coefficients(model, result.chains);
  fit.stage1.covariance = residual_covariances(data, fit.stage1.coefficients);
  const OlsFit stage2 = ols(stage_two_design(fit.stage1, data, spec), outcome_vector(data));
  fit.names = spec.coefficient_names();
  fit.estimate = stage2.coef;
  fit.std_error = stage2.std_error;
  fit.lower = stage2.lower;
  fit.upper = stage2.upper;
  return fit;
}

}  // namespace varjm
