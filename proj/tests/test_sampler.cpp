#include "test_support.hpp"
#include "varjm/sampler.hpp"

#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace varjm;
using namespace varjm::testing;

namespace {

// Smooth non-quadratic 3-d target for integrator checks.
class Quartic : public LogDensity {
 public:
  int dim() const override { return 3; }
  double log_density(const Vector& u) const override {
    return -0.25 * u.array().pow(4).sum() - 0.5 * u[0] * u[1] - std::log(std::cosh(u[2]));
  }
  double log_density_gradient(const Vector& u, Vector& g) const override {
    g = -u.array().pow(3).matrix();
    g[0] -= 0.5 * u[1];
    g[1] -= 0.5 * u[0];
    g[2] -= std::tanh(u[2]);
    return log_density(u);
  }
  std::vector<std::string> parameter_names() const override { return {"a", "b", "c"}; }
  Vector constrain(const Vector& u) const override { return u; }
};

class Nowhere : public LogDensity {
 public:
  int dim() const override { return 1; }
  double log_density(const Vector& u) const override {
    return u[0] == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  double log_density_gradient(const Vector& u, Vector& g) const override {
    g = Vector::Zero(1);
    return log_density(u);
  }
  std::vector<std::string> parameter_names() const override { return {"a"}; }
  Vector constrain(const Vector& u) const override { return u; }
};

PhasePoint point(const LogDensity& t, Vector u, Vector p) {
  PhasePoint z;
  z.u = std::move(u);
  z.p = std::move(p);
  z.logp = t.log_density_gradient(z.u, z.grad);
  return z;
}

std::vector<double> column(const std::vector<ChainOutput>& chains, int col) {
  std::vector<double> v;
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) v.push_back(c.draws(r, col));
  return v;
}

std::vector<std::vector<double>> per_chain(const std::vector<ChainOutput>& chains, int col) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) v.push_back(c.draws(r, col));
    out.push_back(v);
  }
  return out;
}

// Rank-normalized split R-hat written out directly: quadratic-time ranks.
double rhat_oracle(const std::vector<double>& chain) {
  const std::size_t half = chain.size() / 2;
  std::vector<std::vector<double>> parts{{chain.begin(), chain.begin() + static_cast<long>(half)},
                                         {chain.end() - static_cast<long>(half), chain.end()}};
  auto basic = [](const std::vector<std::vector<double>>& c) {
    const double n = static_cast<double>(c[0].size());
    double m0 = 0, m1 = 0;
    for (double x : c[0]) m0 += x / n;
    for (double x : c[1]) m1 += x / n;
    double v0 = 0, v1 = 0;
    for (double x : c[0]) v0 += (x - m0) * (x - m0) / (n - 1);
    for (double x : c[1]) v1 += (x - m1) * (x - m1) / (n - 1);
    const double w = 0.5 * (v0 + v1);
    const double b = n * ((m0 - m1) * (m0 - m1) / 2.0);
    return std::sqrt(((n - 1) / n * w + b / n) / w);
  };
  auto normalize = [](std::vector<std::vector<double>> c) {
    std::vector<double> all;
    for (const auto& p : c) all.insert(all.end(), p.begin(), p.end());
    const double s = static_cast<double>(all.size());
    const boost::math::normal_distribution<double> normal;
    for (auto& p : c)
      for (double& x : p) {
        double less = 0, equal = 0;
        for (double y : all) {
          less += y < x;
          equal += y == x;
        }
        const double rank = less + (equal + 1) / 2;
        x = boost::math::quantile(normal, (rank - 0.375) / (s + 0.25));
      }
    return c;
  };
  std::vector<double> all(parts[0]);
  all.insert(all.end(), parts[1].begin(), parts[1].end());
  std::sort(all.begin(), all.end());
  const double med = all.size() % 2 ? all[all.size() / 2] : 0.5 * (all[all.size() / 2 - 1] + all[all.size() / 2]);
  auto folded = parts;
  for (auto& p : folded)
    for (double& x : p) x = std::abs(x - med);
  return std::max(basic(normalize(parts)), basic(normalize(folded)));
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("leapfrog on a harmonic oscillator keeps the energy error bounded") {
  DiagonalGaussian target(Vector::Ones(1));
  const Vector inv_mass = Vector::Ones(1);
  for (double eps : {0.1, 1.0, 1.9}) {
    PhasePoint z = point(target, Vector::Constant(1, 1.0), Vector::Constant(1, 0.3));
    const double h0 = -z.logp + kinetic_energy(z.p, inv_mass);
    double worst = 0.0;
    for (int step = 0; step < 1000; ++step) {
      leapfrog(target, z, eps, inv_mass);
      worst = std::max(worst, std::abs(-z.logp + kinetic_energy(z.p, inv_mass) - h0));
    }
    // Shadow-Hamiltonian bound: relative error O(eps^2 / (4 - eps^2)).
    CHECK(worst < h0 * eps * eps / (4 - eps * eps) + 1e-12);
  }
}

TEST_CASE("leapfrog is reversible and a zero step is the identity") {
  Quartic target;
  const Vector inv_mass = Vector(Eigen::Vector3d(0.5, 1.0, 2.0));
  for (int rep = 0; rep < 20; ++rep) {
    const Vector u0 = uniform_point(3, 1.5, 100 + rep);
    const Vector p0 = uniform_point(3, 1.5, 200 + rep);
    PhasePoint z = point(target, u0, p0);
    for (int s = 0; s < 10; ++s) leapfrog(target, z, 0.1, inv_mass);
    z.p = -z.p;
    for (int s = 0; s < 10; ++s) leapfrog(target, z, 0.1, inv_mass);
    CHECK((z.u - u0).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((z.p + p0).cwiseAbs().maxCoeff() < 1e-10);
  }
  PhasePoint z = point(target, uniform_point(3, 1, 1), uniform_point(3, 1, 2));
  const PhasePoint before = z;
  leapfrog(target, z, 0.0, inv_mass);
  CHECK(z.u == before.u);
  CHECK(z.p == before.p);
}

TEST_CASE("leapfrog preserves phase-space volume") {
  Quartic target;
  const Vector inv_mass = Vector(Eigen::Vector3d(0.7, 1.0, 1.3));
  const Vector u0 = uniform_point(3, 1.0, 5), p0 = uniform_point(3, 1.0, 6);
  auto step = [&](const Vector& x) {
    PhasePoint z = point(target, x.head(3), x.tail(3));
    leapfrog(target, z, 0.2, inv_mass);
    Vector out(6);
    out << z.u, z.p;
    return out;
  };
  Vector x(6);
  x << u0, p0;
  Matrix jac(6, 6);
  const double h = 1e-6;
  for (int k = 0; k < 6; ++k) {
    Vector up = x, down = x;
    up[k] += h;
    down[k] -= h;
    jac.col(k) = (step(up) - step(down)) / (2 * h);
  }
  CHECK(std::abs(jac.determinant() - 1.0) < 1e-6);
}

TEST_CASE("warmup windows double and end at the terminal buffer") {
  const WarmupSchedule s(1000);
  CHECK(s.window_ends() == std::vector<int>{99, 149, 249, 449, 949});
  CHECK_FALSE(s.in_slow_window(74));
  CHECK(s.in_slow_window(75));
  CHECK_FALSE(s.in_slow_window(950));
  const WarmupSchedule small(100);
  CHECK(small.window_ends() == std::vector<int>{89});
  CHECK(small.in_slow_window(15));
  CHECK_FALSE(small.in_slow_window(14));
}

TEST_CASE("variance estimator regularizes and floors") {
  VarianceEstimator est(2);
  for (int i = 0; i < 100; ++i) est.add(Vector(Eigen::Vector2d(3.0, i % 2 ? 1.0 : -1.0)));
  const Vector v = est.regularized_variance();
  CHECK(v[0] >= 1e-10);
  CHECK(v[0] == doctest::Approx(1e-3 * 5.0 / 105.0));
  CHECK(v[1] == doctest::Approx(100.0 / 105.0 * (100.0 / 99.0) + 1e-3 * 5.0 / 105.0));
}

TEST_CASE("dual averaging moves toward the target acceptance") {
  StepsizeAdapter a(0.8);
  a.restart(1.0);
  double eps = 1.0;
  for (int i = 0; i < 50; ++i) eps = a.update(0.2);
  CHECK(eps < 1.0);
  StepsizeAdapter b(0.8);
  b.restart(1.0);
  for (int i = 0; i < 50; ++i) eps = b.update(1.0);
  CHECK(eps > 1.0);
}

TEST_CASE("standard gaussian calibration") {
  DiagonalGaussian target(Vector::Ones(10));
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iterations = 2000;
  cfg.warmup = 1000;
  cfg.seed = 2024;
  const auto run = run_chains(target, cfg);
  for (int k = 0; k < 10; ++k) {
    const auto& s = run.summary.parameters[static_cast<std::size_t>(k)];
    CHECK(std::abs(s.mean) < 0.1);
    CHECK(s.rhat < 1.02);
    CHECK(ks_standard_normal(column(run.chains, k)) < 0.05);
  }
  for (const auto& c : run.chains) {
    for (int k = 0; k < 10; ++k) {
      CHECK(c.mass_diag[k] > 0.5);
      CHECK(c.mass_diag[k] < 2.0);
    }
    CHECK(c.divergence_count == 0);
  }
}

TEST_CASE("one-dimensional gaussian draws pass a KS test") {
  DiagonalGaussian target(Vector::Ones(1));
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 6000;
  cfg.warmup = 1000;
  cfg.seed = 77;
  const auto run = run_chains(target, cfg);
  CHECK(ks_standard_normal(column(run.chains, 0)) < 0.05);
}

TEST_CASE("correlated gaussian") {
  CorrelatedGaussian target(0.9);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.seed = 3;
  const auto run = run_chains(target, cfg);
  const auto x = column(run.chains, 0), y = column(run.chains, 1);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy) - 0.9) < 0.05);
}

TEST_CASE("non-centered funnel") {
  NonCenteredFunnel target(9);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.seed = 9;
  const auto run = run_chains(target, cfg);
  CHECK(std::abs(run.summary.at("v").mean) < 0.2);
}

TEST_CASE("higher target acceptance gives a smaller step size") {
  DiagonalGaussian target(Vector::LinSpaced(5, 0.5, 2.0));
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 600;
  cfg.warmup = 500;
  cfg.seed = 12;
  cfg.target_accept = 0.95;
  const auto high = run_chains(target, cfg);
  cfg.target_accept = 0.6;
  const auto low = run_chains(target, cfg);
  CHECK(high.chains[0].stepsize_final < low.chains[0].stepsize_final);
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  Quartic target;
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.iterations = 200;
  cfg.warmup = 100;
  cfg.seed = 99;
  RunOptions one, three;
  three.workers = 3;
  const auto a = run_chains(target, cfg, one);
  const auto b = run_chains(target, cfg, one);
  const auto c = run_chains(target, cfg, three);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.chains[k].draws == b.chains[k].draws);
    CHECK(a.chains[k].draws == c.chains[k].draws);
  }
  CHECK(a.chains[0].draws != a.chains[1].draws);
}

TEST_CASE("a target with no usable neighbourhood is reported") {
  Nowhere target;
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 40;
  cfg.warmup = 20;
  cfg.init_jitter = 0.0;
  try {
    run_chains(target, cfg);
    FAIL("expected an error");
  } catch (const SamplerError& e) {
    CHECK(std::string(e.what()).find("init_jitter") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  cfg.warmup = 5;
  CHECK_THROWS_AS(cfg.validate(), SamplerError);
  cfg.warmup = 100;
  cfg.iterations = 105;
  CHECK_THROWS_AS(cfg.validate(), SamplerError);
  cfg.iterations = 200;
  cfg.target_accept = 1.0;
  CHECK_THROWS_AS(cfg.validate(), SamplerError);
}

TEST_CASE("split rhat") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> iid(4, std::vector<double>(1000));
  for (auto& c : iid)
    for (double& x : c) x = normal(rng);
  const double r = split_rhat(iid);
  CHECK(r >= 0.99);
  CHECK(r <= 1.02);

  std::vector<std::vector<double>> offset(2, std::vector<double>(1000));
  for (std::size_t c = 0; c < 2; ++c)
    for (double& x : offset[c]) x = normal(rng) + 5.0 * static_cast<double>(c);
  CHECK(split_rhat(offset) > 1.5);

  std::vector<double> one(501);
  for (double& x : one) x = normal(rng);
  CHECK(split_rhat({one}) == split_rhat({one}));
  one.pop_back();
  CHECK(split_rhat({one}) == doctest::Approx(rhat_oracle(one)).epsilon(1e-12));

  std::vector<std::vector<double>> constant(2, std::vector<double>(100, 1.5));
  CHECK(std::isnan(split_rhat(constant)));
  CHECK_THROWS_AS(split_rhat({std::vector<double>(7, 0.0)}), SamplerError);
}

TEST_CASE("bulk effective sample size") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  const int n = 4000;
  std::vector<double> iid(n);
  for (double& x : iid) x = normal(rng);
  const double e = ess_bulk({iid});
  CHECK(e > 0.8 * n);
  CHECK(e < 1.2 * n);

  const double phi = 0.9;
  std::vector<double> ar(n);
  ar[0] = normal(rng) / std::sqrt(1 - phi * phi);
  for (int i = 1; i < n; ++i) ar[static_cast<std::size_t>(i)] = phi * ar[static_cast<std::size_t>(i - 1)] + normal(rng);
  const double expected = n * (1 - phi) / (1 + phi);
  const double got = ess_bulk({ar});
  CHECK(got > expected / 1.5);
  CHECK(got < expected * 1.5);

  std::vector<double> alt(n);
  for (int i = 0; i < n; ++i) alt[static_cast<std::size_t>(i)] = (i % 2 ? 1.0 : -1.0) + 0.01 * normal(rng);
  CHECK(ess_bulk({alt}) > n);
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 5.0);
  CHECK(quantile(v, 0.5) == 3.0);
  CHECK(quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK(quantile(v, 0.975) == doctest::Approx(4.9));
}

TEST_CASE("summaries pool chains") {
  DiagonalGaussian target(Vector::Constant(2, 2.0));
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 400;
  cfg.warmup = 200;
  cfg.seed = 5;
  RunOptions opts;
  opts.summary_names = {"x2"};
  const auto run = run_chains(target, cfg, opts);
  REQUIRE(run.summary.parameters.size() == 1);
  const auto& s = run.summary.at("x2");
  const auto pooled = column(run.chains, 1);
  CHECK(s.mean == doctest::Approx(std::accumulate(pooled.begin(), pooled.end(), 0.0) / 400.0).epsilon(1e-12));
  CHECK(s.q025 <= s.q975);
  CHECK(s.sd == doctest::Approx(2.0).epsilon(0.2));
  CHECK(s.rhat == split_rhat(per_chain(run.chains, 1)));
  CHECK_THROWS_AS(run.summary.at("nope"), SamplerError);
}

}  // TEST_SUITE
