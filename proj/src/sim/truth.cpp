#include "varjm/correlation.hpp"
#include "varjm/sim.hpp"

#include <cmath>
#include <random>

namespace varjm {

namespace {

Matrix cov2(double a, double ab, double b) {
  Matrix m(2, 2);
  m << a, ab, ab, b;
  return m;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v[k++] = x;
  return v;
}

// Monomial in the Q = 2 latent quantities: a product of b entries (indices
// into b11 b12 b21 b22) times d1^e1 d2^e2 r^er.
struct Monomial {
  std::vector<int> b;
  int e1 = 0, e2 = 0, er = 0;
  double coef = 1.0;

  Monomial operator*(const Monomial& o) const {
    Monomial m{b, e1 + o.e1, e2 + o.e2, er + o.er, coef * o.coef};
    m.b.insert(m.b.end(), o.b.begin(), o.b.end());
    return m;
  }
};

// E[prod x_idx] for x ~ N(mu, cov), by Stein's identity.
double gaussian_moment(const Vector& mu, const Matrix& cov, std::vector<int> idx) {
  if (idx.empty()) return 1.0;
  const int i = idx.back();
  idx.pop_back();
  double out = mu[i] * gaussian_moment(mu, cov, idx);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (cov(i, idx[j]) == 0.0) continue;
    std::vector<int> rest = idx;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
    out += cov(i, idx[j]) * gaussian_moment(mu, cov, rest);
  }
  return out;
}

}  // namespace

SimTruth SimTruth::sim1() {
  SimTruth t;
  t.id = "sim1_q2";
  t.num_markers = 2;
  t.beta = {vec({0.0, 2.0}), vec({2.0, 1.0})};
  t.sigma = {cov2(1.0, -0.05, 1.0), cov2(1.0, -0.1, 0.5)};
  // log d1 ~ N(0, 0.75^2) / 2 and log d2 ~ N(0.5, 0.5^2) / 2
  t.log_sd_mean = vec({0.0, 0.25});
  t.log_sd_scale = vec({0.375, 0.25});
  t.corr_shapes = {{1.0, 5.0}};
  t.outcome_coef = vec({-3.0, -3.0, -3.0, 3.0, 2.0, -1.0, 2.0});
  return t;
}

SimTruth SimTruth::sim2() {
  SimTruth t = sim1();
  t.id = "sim2_q3";
  t.num_markers = 3;
  t.beta.push_back(vec({1.0, 1.0}));
  t.sigma.push_back(cov2(1.0, -0.25, 1.0));
  t.log_sd_mean = vec({0.0, 0.25, 0.0});
  t.log_sd_scale = vec({0.375, 0.25, 0.5});
  t.corr_shapes = {{1.0, 5.0}, {1.0, 5.0}, {2.0, 2.0}};
  // b11 b12 b21 b22 b31 b32 | s11 s12 s22 s13 s23 s33
  t.outcome_coef = vec({-3.0, -3.0, -3.0, 3.0, 3.0, 3.0, 2.0, -1.0, 2.0, -2.0, 2.0, 1.0});
  return t;
}

SimTruth SimTruth::sim3() {
  SimTruth t = sim1();
  t.id = "sim3_nonlinear";
  t.outcome_coef = vec({2.0, 1.0, -1.0, 0.5, 2.0, -1.0, 2.0});
  t.quad_b21 = 0.5;
  t.quad_s11 = 0.75;
  t.outcome_sd = std::sqrt(0.5);
  return t;
}

SimTruth SimTruth::by_id(const std::string& id) {
  if (id == "sim1_q2" || id == "sim1") return sim1();
  if (id == "sim2_q3" || id == "sim2") return sim2();
  if (id == "sim3_nonlinear" || id == "sim3") return sim3();
  throw SimulationError("unknown simulation '" + id + "' (expected sim1_q2, sim2_q3 or sim3_nonlinear)");
}

ModelSpec SimTruth::model_spec() const { return ModelSpec::defaults(num_markers, 0); }

void SimTruth::validate() const {
  const auto q = static_cast<std::size_t>(num_markers);
  if (num_markers < 1) throw SimulationError("need at least one marker");
  if (beta.size() != q || sigma.size() != q) throw SimulationError("one beta and one sigma per marker required");
  if (log_sd_mean.size() != num_markers || log_sd_scale.size() != num_markers)
    throw SimulationError("one log-sd mean and scale per marker required");
  if (corr_shapes.size() != static_cast<std::size_t>(num_angles(num_markers)))
    throw SimulationError("one Beta shape pair per marker pair required");
  for (const auto& s : sigma) {
    if (s.rows() != 2 || s.cols() != 2) throw SimulationError("random-effect covariances must be 2 x 2");
    const Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success || !(s.determinant() > 0.0))
      throw SimulationError("random-effect covariance is not positive definite");
  }
  for (const auto& [a, b] : corr_shapes)
    if (!(a > 0.0 && b > 0.0)) throw SimulationError("Beta shapes must be positive");
  if ((log_sd_scale.array() < 0.0).any()) throw SimulationError("negative log-sd scale");
  if (outcome_coef.size() != static_cast<Eigen::Index>(model_spec().features.size()))
    throw SimulationError("outcome coefficient count does not match the default feature list");
  if (!(outcome_sd > 0.0)) throw SimulationError("outcome sd must be positive");
  if (num_subjects < 2) throw SimulationError("need at least 2 subjects");
  if (min_obs < 1 || max_obs < min_obs) throw SimulationError("invalid observation-count range");
}

double true_eta(const SimTruth& truth, const SubjectState& subject) {
  const Matrix cov = subject.covariance();
  const Vector f = feature_vector(truth.model_spec().features, subject.b, cov, Vector());
  double eta = f.dot(truth.outcome_coef);
  if (truth.nonlinear()) {
    const double b21 = subject.b(1, 0);
    const double s11 = cov(0, 0);
    eta += truth.quad_b21 * b21 * b21 + truth.quad_s11 * s11 * s11;
  }
  return eta;
}

Vector sim3_target_coefficients(const SimTruth& truth, std::size_t n_oracle, std::uint64_t seed) {
  if (n_oracle < 100000) throw SimulationError("the linear-approximation oracle needs at least 1e5 subjects");
  const auto features = truth.model_spec().features;
  const auto p = static_cast<Eigen::Index>(features.size());
  const auto subjects = generate_subjects(truth, n_oracle, seed);
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> noise(0.0, 0.1);
  Matrix xtx = Matrix::Zero(p, p);
  Vector xty = Vector::Zero(p);
  for (const auto& s : subjects) {
    const Vector f = feature_vector(features, s.b, s.covariance(), Vector());
    const double y = true_eta(truth, s) + noise(rng);
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(f);
    xty += y * f;
  }
  return xtx.selfadjointView<Eigen::Lower>().ldlt().solve(xty);
}

Vector sim3_limit_coefficients(const SimTruth& truth) {
  truth.validate();
  if (truth.num_markers != 2) throw SimulationError("the closed-form oracle covers two-marker designs only");
  Vector mu(4);
  mu << truth.beta[0], truth.beta[1];
  Matrix cov = Matrix::Zero(4, 4);
  cov.topLeftCorner(2, 2) = truth.sigma[0];
  cov.bottomRightCorner(2, 2) = truth.sigma[1];
  const auto lognormal = [&](int q, int k) {
    return std::exp(k * truth.log_sd_mean[q] + 0.5 * k * k * truth.log_sd_scale[q] * truth.log_sd_scale[q]);
  };
  const auto [a, b] = truth.corr_shapes[0];
  const auto corr_moment = [a = a, b = b](int k) {
    // r = 2B - 1 with B ~ Beta(a, b)
    double out = 0.0, binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      double beta_moment = 1.0;
      for (int m = 0; m < j; ++m) beta_moment *= (a + m) / (a + b + m);
      out += binom * std::pow(2.0, j) * beta_moment * ((k - j) % 2 == 0 ? 1.0 : -1.0);
      binom = binom * (k - j) / (j + 1);
    }
    return out;
  };
  const auto expect = [&](const Monomial& m) {
    return m.coef * gaussian_moment(mu, cov, m.b) * lognormal(0, m.e1) * lognormal(1, m.e2) * corr_moment(m.er);
  };

  // default feature order: b11 b12 b21 b22 s11 s12 s22
  const std::vector<Monomial> features{{{0}}, {{1}}, {{2}}, {{3}}, {{}, 2, 0, 0}, {{}, 1, 1, 1}, {{}, 0, 2, 0}};
  std::vector<Monomial> eta;
  for (std::size_t j = 0; j < features.size(); ++j) {
    Monomial m = features[j];
    m.coef = truth.outcome_coef[static_cast<Eigen::Index>(j)];
    eta.push_back(m);
  }
  eta.push_back({{2, 2}, 0, 0, 0, truth.quad_b21});
  eta.push_back({{}, 4, 0, 0, truth.quad_s11});

  Matrix xtx(7, 7);
  Vector xty = Vector::Zero(7);
  for (int j = 0; j < 7; ++j) {
    for (int k = 0; k < 7; ++k) xtx(j, k) = expect(features[static_cast<std::size_t>(j)] * features[static_cast<std::size_t>(k)]);
    for (const auto& m : eta) xty[j] += expect(features[static_cast<std::size_t>(j)] * m);
  }
  return xtx.ldlt().solve(xty);
}

std::map<std::string, double> outcome_targets(const SimTruth& truth, std::size_t n_oracle) {
  const auto names = truth.model_spec().coefficient_names();
  Vector values = truth.outcome_coef;
  if (truth.nonlinear())
    values = n_oracle == 0 ? sim3_limit_coefficients(truth) : sim3_target_coefficients(truth, n_oracle);
  std::map<std::string, double> out;
  for (std::size_t j = 0; j < names.size(); ++j) out[names[j]] = values[static_cast<Eigen::Index>(j)];
  return out;
}

ParameterState truth_state(const SimTruth& truth, const SimData& sim, const Vector& coef) {
  const int q = truth.num_markers;
  ParameterState st;
  st.subjects = sim.subjects;
  auto& pop = st.population;
  pop.beta.resize(q, 2);
  pop.k.resize(q, 2);
  pop.rho.resize(q);
  for (int m = 0; m < q; ++m) {
    const Matrix& s = truth.sigma[static_cast<std::size_t>(m)];
    pop.beta.row(m) = truth.beta[static_cast<std::size_t>(m)].transpose();
    pop.k(m, 0) = std::sqrt(s(0, 0));
    pop.k(m, 1) = std::sqrt(s(1, 1));
    pop.rho[m] = s(0, 1) / (pop.k(m, 0) * pop.k(m, 1));
  }
  pop.nu = truth.log_sd_mean;
  pop.psi = truth.log_sd_scale;
  const int pairs = num_angles(q);
  pop.a_prime.resize(pairs);
  pop.b_prime.resize(pairs);
  for (int k = 0; k < pairs; ++k) {
    pop.a_prime[k] = truth.corr_shapes[static_cast<std::size_t>(k)].first;
    pop.b_prime[k] = truth.corr_shapes[static_cast<std::size_t>(k)].second;
  }
  st.outcome.coef = coef;
  st.outcome.sigma = truth.outcome_sd;
  return st;
}

}  // namespace varjm
