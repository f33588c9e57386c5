#include "varjm/correlation.hpp"
#include "varjm/densities.hpp"
#include "varjm/model.hpp"

#include <algorithm>
#include <cmath>

namespace varjm {

namespace {

int num_scales(const ModelSpec& spec) {
  if (!spec.include_outcome) return 0;
  return spec.family == OutcomeFamily::Gaussian ? 1 : 3;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

std::string pair_label(int q, int pair) {
  const auto [k, l] = angle_pair(pair, q);
  return std::to_string(k + 1) + "." + std::to_string(l + 1);
}

}  // namespace

ParameterLayout::ParameterLayout(const ModelSpec& spec, std::size_t num_subjects)
    : n_(num_subjects), q_(spec.num_markers), pairs_(num_angles(spec.num_markers)) {
  subject_block_ = (kBasisDim + 1) * q_ + pairs_;
  population_offset_ = static_cast<int>(n_) * subject_block_;
  outcome_offset_ = population_offset_ + kPopFields * q_ + 2 * pairs_;
  num_coef_ = spec.include_outcome ? static_cast<int>(spec.features.size()) : 0;
  dim_ = outcome_offset_ + num_coef_ + num_scales(spec);
}

Matrix SubjectState::correlation() const {
  const auto q = static_cast<int>(log_sd.size());
  if (q == 1) return Matrix::Ones(1, 1);
  if (q == 2) {
    Matrix r(2, 2);
    r << 1.0, corr[0], corr[0], 1.0;
    return r;
  }
  return angles_to_corr(corr, q);
}

Matrix SubjectState::covariance() const {
  const Vector sd = log_sd.array().exp();
  return sd.asDiagonal() * correlation() * sd.asDiagonal();
}

Matrix PopulationState::random_effect_cov(int q) const {
  Matrix s(2, 2);
  s(0, 0) = k(q, 0) * k(q, 0);
  s(1, 1) = k(q, 1) * k(q, 1);
  s(0, 1) = s(1, 0) = rho[q] * k(q, 0) * k(q, 1);
  return s;
}

ParameterState transform_to_constrained(const Vector& u, const ModelSpec& spec,
                                        const ParameterLayout& layout, double* log_jacobian) {
  if (u.size() != layout.dim()) {
    throw ModelError("unconstrained vector has length " + std::to_string(u.size()) + ", expected " +
                     std::to_string(layout.dim()));
  }
  const int q = spec.num_markers;
  const int pairs = layout.num_pairs();
  double lj = 0.0;
  ParameterState st;

  auto& pop = st.population;
  pop.beta.resize(q, 2);
  pop.k.resize(q, 2);
  pop.rho.resize(q);
  pop.nu.resize(q);
  pop.psi.resize(q);
  for (int m = 0; m < q; ++m) {
    pop.beta(m, 0) = u[layout.pop_index(m, kBeta0)];
    pop.beta(m, 1) = u[layout.pop_index(m, kBeta1)];
    for (int p = 0; p < 2; ++p) {
      const double lk = u[layout.pop_index(m, kLogK0 + p)];
      pop.k(m, p) = std::exp(lk);
      lj += lk;
    }
    const double w = u[layout.pop_index(m, kAtanhRho)];
    pop.rho[m] = std::tanh(w);
    lj += math::log1m_tanh_sq(w);
    pop.nu[m] = u[layout.pop_index(m, kNu)];
    const double lpsi = u[layout.pop_index(m, kLogPsi)];
    pop.psi[m] = std::exp(lpsi);
    lj += lpsi;
  }
  pop.a_prime.resize(pairs);
  pop.b_prime.resize(pairs);
  for (int k = 0; k < pairs; ++k) {
    pop.a_prime[k] = std::exp(u[layout.a_prime_index(k)]);
    pop.b_prime[k] = std::exp(u[layout.b_prime_index(k)]);
    lj += u[layout.a_prime_index(k)] + u[layout.b_prime_index(k)];
  }

  st.subjects.resize(layout.num_subjects());
  for (std::size_t i = 0; i < layout.num_subjects(); ++i) {
    auto& s = st.subjects[i];
    s.b.resize(q, 2);
    for (int m = 0; m < q; ++m) {
      const double c0 = u[layout.coef_index(i, m, 0)];
      const double c1 = u[layout.coef_index(i, m, 1)];
      if (spec.parameterization == Parameterization::NonCentered) {
        const double rho = pop.rho[m];
        const double sq = std::sqrt(1.0 - rho * rho);
        s.b(m, 0) = pop.beta(m, 0) + pop.k(m, 0) * c0;
        s.b(m, 1) = pop.beta(m, 1) + pop.k(m, 1) * (rho * c0 + sq * c1);
        lj += std::log(pop.k(m, 0)) + std::log(pop.k(m, 1)) +
              0.5 * math::log1m_tanh_sq(u[layout.pop_index(m, kAtanhRho)]);
      } else {
        s.b(m, 0) = c0;
        s.b(m, 1) = c1;
      }
    }
    s.log_sd.resize(q);
    for (int m = 0; m < q; ++m) s.log_sd[m] = u[layout.log_sd_index(i, m)];
    s.corr.resize(static_cast<std::size_t>(pairs));
    for (int k = 0; k < pairs; ++k) {
      const double x = u[layout.corr_index(i, k)];
      if (q == 2) {
        s.corr[0] = std::tanh(x);
        lj += math::log1m_tanh_sq(x);
      } else {
        const double sig = math::sigmoid(x);
        const double theta = kPi * sig;
        s.corr[static_cast<std::size_t>(k)] = theta;
        // d cos(theta) / du = -sin(theta) * pi * s * (1 - s)
        lj += std::log(std::sin(theta)) + std::log(kPi) + math::log_sigmoid(x) + math::log_sigmoid(-x);
      }
    }
  }

  if (spec.include_outcome) {
    auto& out = st.outcome;
    out.coef = u.segment(layout.outcome_offset(), layout.num_coefficients());
    if (spec.family == OutcomeFamily::Gaussian) {
      const double ls = u[layout.scale_index(0)];
      out.sigma = std::exp(ls);
      lj += ls;
    } else {
      const double l1 = u[layout.scale_index(0)];
      const double lg = u[layout.scale_index(1)];
      const double lp = u[layout.scale_index(2)];
      out.sigma1 = std::exp(l1);
      out.sigma2 = out.sigma1 + std::exp(lg);
      out.pi_mix = math::sigmoid(lp);
      lj += l1 + lg + math::log_sigmoid(lp) + math::log_sigmoid(-lp);
    }
  }
  if (log_jacobian != nullptr) *log_jacobian = lj;
  return st;
}

Vector transform_to_unconstrained(const ParameterState& st, const ModelSpec& spec,
                                  const ParameterLayout& layout) {
  const int q = spec.num_markers;
  const int pairs = layout.num_pairs();
  Vector u(layout.dim());
  const auto& pop = st.population;
  for (int m = 0; m < q; ++m) {
    u[layout.pop_index(m, kBeta0)] = pop.beta(m, 0);
    u[layout.pop_index(m, kBeta1)] = pop.beta(m, 1);
    u[layout.pop_index(m, kLogK0)] = std::log(pop.k(m, 0));
    u[layout.pop_index(m, kLogK1)] = std::log(pop.k(m, 1));
    u[layout.pop_index(m, kAtanhRho)] = std::atanh(pop.rho[m]);
    u[layout.pop_index(m, kNu)] = pop.nu[m];
    u[layout.pop_index(m, kLogPsi)] = std::log(pop.psi[m]);
  }
  for (int k = 0; k < pairs; ++k) {
    u[layout.a_prime_index(k)] = std::log(pop.a_prime[k]);
    u[layout.b_prime_index(k)] = std::log(pop.b_prime[k]);
  }
  if (st.subjects.size() != layout.num_subjects()) throw ModelError("state has the wrong number of subjects");
  for (std::size_t i = 0; i < layout.num_subjects(); ++i) {
    const auto& s = st.subjects[i];
    for (int m = 0; m < q; ++m) {
      if (spec.parameterization == Parameterization::NonCentered) {
        const double rho = pop.rho[m];
        const double z0 = (s.b(m, 0) - pop.beta(m, 0)) / pop.k(m, 0);
        const double z1 = ((s.b(m, 1) - pop.beta(m, 1)) / pop.k(m, 1) - rho * z0) / std::sqrt(1.0 - rho * rho);
        u[layout.coef_index(i, m, 0)] = z0;
        u[layout.coef_index(i, m, 1)] = z1;
      } else {
        u[layout.coef_index(i, m, 0)] = s.b(m, 0);
        u[layout.coef_index(i, m, 1)] = s.b(m, 1);
      }
      u[layout.log_sd_index(i, m)] = s.log_sd[m];
    }
    for (int k = 0; k < pairs; ++k) {
      const double c = s.corr[static_cast<std::size_t>(k)];
      u[layout.corr_index(i, k)] = q == 2 ? std::atanh(c) : logit(c / kPi);
    }
  }
  if (spec.include_outcome) {
    const auto& out = st.outcome;
    if (out.coef.size() != layout.num_coefficients()) throw ModelError("state has the wrong number of coefficients");
    u.segment(layout.outcome_offset(), layout.num_coefficients()) = out.coef;
    if (spec.family == OutcomeFamily::Gaussian) {
      u[layout.scale_index(0)] = std::log(out.sigma);
    } else {
      if (!(out.sigma2 > out.sigma1)) throw ModelError("mixture state needs sigma1 < sigma2");
      u[layout.scale_index(0)] = std::log(out.sigma1);
      u[layout.scale_index(1)] = std::log(out.sigma2 - out.sigma1);
      u[layout.scale_index(2)] = logit(out.pi_mix);
    }
  }
  return u;
}

Vector constrained_flat(const ParameterState& st, const ModelSpec& spec) {
  const int q = spec.num_markers;
  const int pairs = num_angles(q);
  std::vector<double> v;
  for (const auto& s : st.subjects) {
    for (int m = 0; m < q; ++m) {
      for (int p = 0; p < 2; ++p) v.push_back(s.b(m, p));
    }
    for (int m = 0; m < q; ++m) v.push_back(std::exp(s.log_sd[m]));
    if (pairs > 0) {
      const Matrix r = s.correlation();
      for (int k = 0; k < pairs; ++k) {
        const auto [a, b] = angle_pair(k, q);
        v.push_back(r(a, b));
      }
    }
  }
  const auto& pop = st.population;
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) v.push_back(pop.beta(m, p));
  }
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) v.push_back(pop.k(m, p));
  }
  for (int m = 0; m < q; ++m) v.push_back(pop.rho[m]);
  for (int m = 0; m < q; ++m) v.push_back(pop.nu[m]);
  for (int m = 0; m < q; ++m) v.push_back(pop.psi[m]);
  for (int k = 0; k < pairs; ++k) v.push_back(pop.a_prime[k]);
  for (int k = 0; k < pairs; ++k) v.push_back(pop.b_prime[k]);
  if (spec.include_outcome) {
    const auto& out = st.outcome;
    for (Eigen::Index j = 0; j < out.coef.size(); ++j) v.push_back(out.coef[j]);
    if (spec.family == OutcomeFamily::Gaussian) {
      v.push_back(out.sigma);
    } else {
      v.push_back(out.sigma1);
      v.push_back(out.sigma2);
      v.push_back(out.pi_mix);
    }
  }
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ParameterState state_from_constrained(const Vector& flat, const ModelSpec& spec, std::size_t num_subjects) {
  const int q = spec.num_markers;
  const int pairs = num_angles(q);
  Eigen::Index pos = 0;
  auto next = [&]() {
    if (pos >= flat.size()) throw ModelError("constrained vector is too short");
    return flat[pos++];
  };
  ParameterState st;
  st.subjects.resize(num_subjects);
  for (auto& s : st.subjects) {
    s.b.resize(q, 2);
    for (int m = 0; m < q; ++m) {
      for (int p = 0; p < 2; ++p) s.b(m, p) = next();
    }
    s.log_sd.resize(q);
    for (int m = 0; m < q; ++m) s.log_sd[m] = std::log(next());
    s.corr.resize(static_cast<std::size_t>(pairs));
    if (q == 2) {
      s.corr[0] = next();
    } else if (q > 2) {
      Matrix r = Matrix::Identity(q, q);
      for (int k = 0; k < pairs; ++k) {
        const auto [a, b] = angle_pair(k, q);
        r(a, b) = r(b, a) = next();
      }
      s.corr = corr_to_angles(r);
    }
  }
  auto& pop = st.population;
  pop.beta.resize(q, 2);
  pop.k.resize(q, 2);
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) pop.beta(m, p) = next();
  }
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) pop.k(m, p) = next();
  }
  pop.rho.resize(q);
  pop.nu.resize(q);
  pop.psi.resize(q);
  for (int m = 0; m < q; ++m) pop.rho[m] = next();
  for (int m = 0; m < q; ++m) pop.nu[m] = next();
  for (int m = 0; m < q; ++m) pop.psi[m] = next();
  pop.a_prime.resize(pairs);
  pop.b_prime.resize(pairs);
  for (int k = 0; k < pairs; ++k) pop.a_prime[k] = next();
  for (int k = 0; k < pairs; ++k) pop.b_prime[k] = next();
  if (spec.include_outcome) {
    auto& out = st.outcome;
    out.coef.resize(static_cast<Eigen::Index>(spec.features.size()));
    for (Eigen::Index j = 0; j < out.coef.size(); ++j) out.coef[j] = next();
    if (spec.family == OutcomeFamily::Gaussian) {
      out.sigma = next();
    } else {
      out.sigma1 = next();
      out.sigma2 = next();
      out.pi_mix = next();
    }
  }
  if (pos != flat.size()) throw ModelError("constrained vector is too long");
  return st;
}

std::vector<std::string> constrained_names(const ModelSpec& spec, const Dataset& data) {
  const int q = spec.num_markers;
  const int pairs = num_angles(q);
  std::vector<std::string> names;
  for (const auto& s : data.subjects()) {
    for (int m = 0; m < q; ++m) {
      for (int p = 0; p < 2; ++p) names.push_back("b." + s.id + "." + std::to_string(m + 1) + "." + std::to_string(p + 1));
    }
    for (int m = 0; m < q; ++m) names.push_back("sd." + s.id + "." + std::to_string(m + 1));
    for (int k = 0; k < pairs; ++k) names.push_back("r." + s.id + "." + pair_label(q, k));
  }
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) names.push_back("beta." + std::to_string(m + 1) + "." + std::to_string(p + 1));
  }
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) names.push_back("k." + std::to_string(m + 1) + "." + std::to_string(p + 1));
  }
  for (int m = 0; m < q; ++m) names.push_back("rho." + std::to_string(m + 1));
  for (int m = 0; m < q; ++m) names.push_back("nu." + std::to_string(m + 1));
  for (int m = 0; m < q; ++m) names.push_back("psi." + std::to_string(m + 1));
  for (int k = 0; k < pairs; ++k) names.push_back("aprime." + pair_label(q, k));
  for (int k = 0; k < pairs; ++k) names.push_back("bprime." + pair_label(q, k));
  if (spec.include_outcome) {
    for (const auto& n : spec.coefficient_names()) names.push_back(n);
    if (spec.family == OutcomeFamily::Gaussian) {
      names.push_back("sigma");
    } else {
      names.insert(names.end(), {"sigma1", "sigma2", "pi"});
    }
  }
  return names;
}

std::vector<std::string> unconstrained_names(const ModelSpec& spec, const Dataset& data) {
  const int q = spec.num_markers;
  const ParameterLayout layout(spec, data.size());
  std::vector<std::string> names(static_cast<std::size_t>(layout.dim()));
  const std::string coef = spec.parameterization == Parameterization::NonCentered ? "z." : "b.";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& id = data[i].id;
    for (int m = 0; m < q; ++m) {
      for (int p = 0; p < 2; ++p) {
        names[static_cast<std::size_t>(layout.coef_index(i, m, p))] =
            coef + id + "." + std::to_string(m + 1) + "." + std::to_string(p + 1);
      }
      names[static_cast<std::size_t>(layout.log_sd_index(i, m))] = "log_sd." + id + "." + std::to_string(m + 1);
    }
    for (int k = 0; k < layout.num_pairs(); ++k) {
      names[static_cast<std::size_t>(layout.corr_index(i, k))] = "corr_raw." + id + "." + pair_label(q, k);
    }
  }
  const char* fields[] = {"beta.{}.1", "beta.{}.2", "log_k.{}.1", "log_k.{}.2", "atanh_rho.{}", "nu.{}", "log_psi.{}"};
  for (int m = 0; m < q; ++m) {
    for (int f = 0; f < ParameterLayout::kPopFields; ++f) {
      std::string n = fields[f];
      n.replace(n.find("{}"), 2, std::to_string(m + 1));
      names[static_cast<std::size_t>(layout.pop_index(m, f))] = n;
    }
  }
  for (int k = 0; k < layout.num_pairs(); ++k) {
    names[static_cast<std::size_t>(layout.a_prime_index(k))] = "log_aprime." + pair_label(q, k);
    names[static_cast<std::size_t>(layout.b_prime_index(k))] = "log_bprime." + pair_label(q, k);
  }
  if (spec.include_outcome) {
    const auto cn = spec.coefficient_names();
    for (int j = 0; j < layout.num_coefficients(); ++j) {
      names[static_cast<std::size_t>(layout.coef_param_index(j))] = cn[static_cast<std::size_t>(j)];
    }
    if (spec.family == OutcomeFamily::Gaussian) {
      names[static_cast<std::size_t>(layout.scale_index(0))] = "log_sigma";
    } else {
      names[static_cast<std::size_t>(layout.scale_index(0))] = "log_sigma1";
      names[static_cast<std::size_t>(layout.scale_index(1))] = "log_sigma_gap";
      names[static_cast<std::size_t>(layout.scale_index(2))] = "logit_pi";
    }
  }
  return names;
}

ParameterState initial_state_from_data(const Dataset& data, const ModelSpec& spec) {
  const int q = spec.num_markers;
  const int pairs = num_angles(q);
  const auto n_subj = static_cast<Eigen::Index>(data.size());
  ParameterState st;
  st.subjects.resize(data.size());
  Matrix all_b(n_subj, 2 * q);
  Matrix all_lsd(n_subj, q);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    const Eigen::Index n = rec.num_obs();
    Matrix design(n, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
      design(j, 0) = 1.0;
      design(j, 1) = rec.times[static_cast<std::size_t>(j)];
    }
    const Matrix coef = design.colPivHouseholderQr().solve(rec.markers);  // 2 x Q
    const Matrix resid = rec.markers - design * coef;
    auto& s = st.subjects[i];
    s.b = coef.transpose();
    const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    Matrix cov = resid.transpose() * resid / denom;
    s.log_sd.resize(q);
    for (int m = 0; m < q; ++m) {
      s.log_sd[m] = 0.5 * std::log(std::max(cov(m, m), 1e-4));
      all_lsd(static_cast<Eigen::Index>(i), m) = s.log_sd[m];
      all_b(static_cast<Eigen::Index>(i), 2 * m) = s.b(m, 0);
      all_b(static_cast<Eigen::Index>(i), 2 * m + 1) = s.b(m, 1);
    }
    Matrix corr = Matrix::Identity(q, q);
    for (int a = 0; a < q; ++a) {
      for (int b = a + 1; b < q; ++b) {
        const double den = std::sqrt(std::max(cov(a, a), 1e-12) * std::max(cov(b, b), 1e-12));
        corr(a, b) = corr(b, a) = 0.5 * std::clamp(cov(a, b) / den, -0.9, 0.9);
      }
    }
    if (q == 2) {
      s.corr = {corr(0, 1)};
    } else if (q > 2) {
      s.corr = corr_to_angles(corr);
    }
  }

  auto& pop = st.population;
  pop.beta.resize(q, 2);
  pop.k.resize(q, 2);
  pop.rho.resize(q);
  pop.nu.resize(q);
  pop.psi.resize(q);
  const double nn = static_cast<double>(n_subj);
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) {
      const auto col = all_b.col(2 * m + p);
      pop.beta(m, p) = col.mean();
      pop.k(m, p) = std::max(std::sqrt((col.array() - col.mean()).square().sum() / (nn - 1.0)), 0.1);
    }
    const auto c0 = all_b.col(2 * m).array() - pop.beta(m, 0);
    const auto c1 = all_b.col(2 * m + 1).array() - pop.beta(m, 1);
    const double r = (c0 * c1).sum() / (nn - 1.0) / (pop.k(m, 0) * pop.k(m, 1));
    pop.rho[m] = std::clamp(r, -0.9, 0.9);
    const auto lcol = all_lsd.col(m);
    pop.nu[m] = lcol.mean();
    pop.psi[m] = std::max(std::sqrt((lcol.array() - lcol.mean()).square().sum() / (nn - 1.0)), 0.1);
  }
  pop.a_prime = Vector::Ones(pairs);
  pop.b_prime = Vector::Ones(pairs);

  if (spec.include_outcome) {
    const auto nf = static_cast<Eigen::Index>(spec.features.size());
    Matrix x(n_subj, nf);
    Vector y(n_subj);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& s = st.subjects[i];
      x.row(static_cast<Eigen::Index>(i)) =
          feature_vector(spec.features, s.b, s.covariance(), data[i].covariates).transpose();
      y[static_cast<Eigen::Index>(i)] = data[i].outcome;
    }
    const Matrix xtx = x.transpose() * x + 1e-6 * Matrix::Identity(nf, nf);
    const Vector coef = xtx.ldlt().solve(x.transpose() * y);
    const double rss = (y - x * coef).squaredNorm();
    const double sigma = std::max(std::sqrt(rss / std::max(nn - static_cast<double>(nf), 1.0)), 0.05);
    auto& out = st.outcome;
    out.coef = coef;
    out.sigma = sigma;
    out.sigma1 = 0.7 * sigma;
    out.sigma2 = 1.4 * sigma;
    out.pi_mix = 0.5;
  }
  return st;
}

}  // namespace varjm
