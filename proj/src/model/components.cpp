#include "varjm/correlation.hpp"
#include "varjm/densities.hpp"
#include "varjm/model.hpp"

#include <cmath>

namespace varjm {

namespace {

double mvn_logpdf(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& llt) {
  const Matrix l = llt.matrixL();
  const Vector z = l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - l.diagonal().array().log().sum() - 0.5 * z.squaredNorm();
}

}  // namespace

double loglik_markers(const ParameterState& state, const Dataset& data) {
  if (state.subjects.size() != data.size()) throw ModelError("state and dataset disagree on subject count");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = state.subjects[i];
    const auto& rec = data[i];
    const Eigen::LLT<Matrix> llt(s.covariance());
    if (llt.info() != Eigen::Success) return math::kNegInf;
    for (Eigen::Index j = 0; j < rec.num_obs(); ++j) {
      const double t = rec.times[static_cast<std::size_t>(j)];
      const Vector mean = s.b.col(0) + s.b.col(1) * t;
      total += mvn_logpdf(rec.markers.row(j).transpose(), mean, llt);
    }
  }
  return total;
}

double logprior_subject_effects(const ParameterState& state, const ModelSpec& spec) {
  const int q = spec.num_markers;
  const auto& pop = state.population;
  std::vector<Eigen::LLT<Matrix>> re_chol;
  for (int m = 0; m < q; ++m) re_chol.emplace_back(pop.random_effect_cov(m));
  double total = 0.0;
  for (const auto& s : state.subjects) {
    for (int m = 0; m < q; ++m) {
      total += mvn_logpdf(s.b.row(m).transpose(), pop.beta.row(m).transpose(), re_chol[static_cast<std::size_t>(m)]);
      total += math::normal_lpdf(s.log_sd[m], pop.nu[m], pop.psi[m]);
    }
    for (int k = 0; k < num_angles(q); ++k) {
      const double c = q == 2 ? s.corr[0] : std::cos(s.corr[static_cast<std::size_t>(k)]);
      total += log_beta_on_interval(c, pop.a_prime[k], pop.b_prime[k]);
    }
  }
  return total;
}

double logprior_population(const ParameterState& state, const ModelSpec& spec) {
  const auto& h = spec.hyper;
  const auto& pop = state.population;
  double total = 0.0;
  for (int m = 0; m < spec.num_markers; ++m) {
    for (int p = 0; p < 2; ++p) {
      total += math::normal_lpdf(pop.beta(m, p), h.m, h.xi);
      total += math::half_cauchy_lpdf(pop.k(m, p), h.tau0);
    }
    Matrix lq(2, 2);
    lq << 1.0, pop.rho[m], pop.rho[m], 1.0;
    total += log_lkj(lq, h.zeta);
    total += math::normal_lpdf(pop.nu[m], h.m, h.xi);
    total += math::half_cauchy_lpdf(pop.psi[m], h.tau);
  }
  for (Eigen::Index k = 0; k < pop.a_prime.size(); ++k) {
    total += math::exponential_lpdf(pop.a_prime[k], h.kappa);
    total += math::exponential_lpdf(pop.b_prime[k], h.kappa_prime);
  }
  if (spec.include_outcome) {
    const auto& out = state.outcome;
    for (Eigen::Index j = 0; j < out.coef.size(); ++j) total += math::normal_lpdf(out.coef[j], 0.0, h.coef_sd);
    if (spec.family == OutcomeFamily::Gaussian) {
      total += math::half_cauchy_lpdf(out.sigma, h.tau1);
    } else {
      total += math::half_cauchy_lpdf(out.sigma1, h.tau1);
      total += math::half_cauchy_lpdf(out.sigma2, h.tau2);
      total += math::beta_lpdf(out.pi_mix, 0.5, 0.5);
    }
  }
  return total;
}

Vector outcome_eta(const ParameterState& state, const Dataset& data, const ModelSpec& spec) {
  Vector eta(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = state.subjects[i];
    eta[static_cast<Eigen::Index>(i)] =
        feature_vector(spec.features, s.b, s.covariance(), data[i].covariates).dot(state.outcome.coef);
  }
  return eta;
}

double loglik_outcome(const ParameterState& state, const Dataset& data, const ModelSpec& spec) {
  if (!spec.include_outcome) return 0.0;
  const Vector eta = outcome_eta(state, data, spec);
  const auto& out = state.outcome;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data[i].outcome;
    const double mu = eta[static_cast<Eigen::Index>(i)];
    if (spec.family == OutcomeFamily::Gaussian) {
      total += math::normal_lpdf(y, mu, out.sigma);
    } else {
      total += math::log_sum_exp(std::log(out.pi_mix) + math::normal_lpdf(y, mu, out.sigma1),
                                 std::log1p(-out.pi_mix) + math::normal_lpdf(y, mu, out.sigma2));
    }
  }
  return total;
}

Vector membership_probabilities(const ParameterState& state, const Dataset& data, const ModelSpec& spec) {
  if (spec.family != OutcomeFamily::ScaleMixture2) throw ModelError("membership probabilities need the mixture family");
  const Vector eta = outcome_eta(state, data, spec);
  const auto& out = state.outcome;
  Vector w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double y = data[static_cast<std::size_t>(i)].outcome;
    const double l1 = std::log(out.pi_mix) + math::normal_lpdf(y, eta[i], out.sigma1);
    const double l2 = std::log1p(-out.pi_mix) + math::normal_lpdf(y, eta[i], out.sigma2);
    w[i] = std::exp(l1 - math::log_sum_exp(l1, l2));
  }
  return w;
}

}  // namespace varjm
