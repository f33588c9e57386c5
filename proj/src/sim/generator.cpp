#include "varjm/correlation.hpp"
#include "varjm/sim.hpp"

#include <cmath>
#include <random>

namespace varjm {

namespace {

struct Sampler {
  const SimTruth& truth;
  std::vector<Matrix> chol;  // per marker, of the random-effect covariance
  std::normal_distribution<double> normal;

  explicit Sampler(const SimTruth& t) : truth(t) {
    t.validate();
    for (const auto& s : t.sigma) chol.push_back(s.llt().matrixL());
  }

  double beta_draw(double a, double b, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
  }

  SubjectState subject(std::mt19937_64& rng) {
    const int q = truth.num_markers;
    SubjectState s;
    s.b.resize(q, 2);
    for (int m = 0; m < q; ++m) {
      const Eigen::Vector2d z(normal(rng), normal(rng));
      s.b.row(m) = (truth.beta[static_cast<std::size_t>(m)] + chol[static_cast<std::size_t>(m)] * z).transpose();
    }
    s.log_sd.resize(q);
    for (int m = 0; m < q; ++m) s.log_sd[m] = truth.log_sd_mean[m] + truth.log_sd_scale[m] * normal(rng);
    const int pairs = num_angles(q);
    s.corr.resize(static_cast<std::size_t>(pairs));
    for (int k = 0; k < pairs; ++k) {
      const auto [a, b] = truth.corr_shapes[static_cast<std::size_t>(k)];
      const double c = 2.0 * beta_draw(a, b, rng) - 1.0;
      s.corr[static_cast<std::size_t>(k)] = q == 2 ? c : std::acos(c);
    }
    return s;
  }
};

}  // namespace

std::vector<SubjectState> generate_subjects(const SimTruth& truth, std::size_t n, std::uint64_t seed) {
  Sampler draw(truth);
  std::mt19937_64 rng(seed);
  std::vector<SubjectState> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw.subject(rng));
  return out;
}

SimData generate(const SimTruth& truth, std::uint64_t seed) {
  Sampler draw(truth);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nobs(truth.min_obs, truth.max_obs);
  std::normal_distribution<double> normal;
  const int q = truth.num_markers;
  std::vector<SubjectRecord> records;
  std::vector<SubjectState> subjects;
  for (int i = 0; i < truth.num_subjects; ++i) {
    SubjectState s = draw.subject(rng);
    SubjectRecord rec;
    rec.id = std::to_string(i + 1);
    const int n = nobs(rng);
    const Matrix noise_chol = s.covariance().llt().matrixL();
    rec.markers.resize(n, q);
    for (int j = 0; j < n; ++j) {
      const double t = j;
      rec.times.push_back(t);
      Vector e(q);
      for (int m = 0; m < q; ++m) e[m] = normal(rng);
      rec.markers.row(j) = (s.b.col(0) + t * s.b.col(1) + noise_chol * e).transpose();
    }
    rec.outcome = true_eta(truth, s) + truth.outcome_sd * normal(rng);
    records.push_back(std::move(rec));
    subjects.push_back(std::move(s));
  }
  return SimData{Dataset(std::move(records), q, 0), std::move(subjects)};
}

}  // namespace varjm
