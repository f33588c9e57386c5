#include "varjm/ppc.hpp"

#include "varjm/csv.hpp"

#include <fstream>
#include <random>

namespace varjm {

namespace {

struct PooledDraw {
  const ChainOutput* chain;
  Eigen::Index row;
};

PooledDraw locate(const std::vector<ChainOutput>& chains, std::size_t index) {
  for (const auto& c : chains) {
    const auto rows = static_cast<std::size_t>(c.draws.rows());
    if (index < rows) return {&c, static_cast<Eigen::Index>(index)};
    index -= rows;
  }
  throw ModelError("draw index out of range");
}

ParameterState draw_state(const std::vector<ChainOutput>& chains, std::size_t index, const ModelSpec& spec,
                          std::size_t n) {
  const PooledDraw d = locate(chains, index);
  return state_from_constrained(d.chain->draws.row(d.row).transpose(), spec, n);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<std::size_t> thin_draws(const std::vector<ChainOutput>& chains, int n_rep) {
  std::size_t total = 0;
  for (const auto& c : chains) total += static_cast<std::size_t>(c.draws.rows());
  if (n_rep < 1) throw ModelError("n_rep must be at least 1");
  if (total < static_cast<std::size_t>(n_rep))
    throw ModelError("posterior predictive check needs " + std::to_string(n_rep) + " draws, have " +
                     std::to_string(total));
  std::vector<std::size_t> idx(static_cast<std::size_t>(n_rep));
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k * total / idx.size();
  return idx;
}

Matrix ppc_outcome(const std::vector<ChainOutput>& chains, const Dataset& data, const ModelSpec& spec, int n_rep,
                   std::uint64_t seed) {
  if (!spec.include_outcome) throw ModelError("outcome replicates need a model with an outcome block");
  const auto idx = thin_draws(chains, n_rep);
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix out(n_rep, n);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const ParameterState st = draw_state(chains, idx[k], spec, data.size());
    const Vector eta = outcome_eta(st, data, spec);
    std::mt19937_64 rng(mix_seed(seed, 2 * k));
    const auto row = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      double sd = st.outcome.sigma;
      if (spec.family == OutcomeFamily::ScaleMixture2)
        sd = unif(rng) < st.outcome.pi_mix ? st.outcome.sigma1 : st.outcome.sigma2;
      out(row, i) = eta[i] + sd * normal(rng);
    }
  }
  return out;
}

Matrix ppc_trajectory_pvalues(const std::vector<ChainOutput>& chains, const Dataset& data, const ModelSpec& spec,
                              int n_rep, std::uint64_t seed) {
  const auto idx = thin_draws(chains, n_rep);
  const int q = data.num_markers();
  const auto n = data.size();
  Matrix score = Matrix::Zero(static_cast<Eigen::Index>(n), q);
  std::normal_distribution<double> normal;
  Vector e(q), t_obs(q), t_rep(q);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const ParameterState st = draw_state(chains, idx[k], spec, n);
    std::mt19937_64 rng(mix_seed(seed, 2 * k + 1));
    for (std::size_t i = 0; i < n; ++i) {
      const SubjectRecord& rec = data[i];
      const SubjectState& s = st.subjects[i];
      const Matrix chol = s.covariance().llt().matrixL();
      const Vector inv_var = (-2.0 * s.log_sd.array()).exp();
      t_obs.setZero();
      t_rep.setZero();
      for (Eigen::Index j = 0; j < rec.num_obs(); ++j) {
        const double t = rec.times[static_cast<std::size_t>(j)];
        const Vector mu = s.b.col(0) + t * s.b.col(1);
        for (int m = 0; m < q; ++m) e[m] = normal(rng);
        const Vector rep_resid = chol * e;
        t_obs.array() += (rec.markers.row(j).transpose() - mu).array().square() * inv_var.array();
        t_rep.array() += rep_resid.array().square() * inv_var.array();
      }
      for (int m = 0; m < q; ++m) {
        const auto row = static_cast<Eigen::Index>(i);
        if (t_obs[m] < t_rep[m]) {
          score(row, m) += 1.0;
        } else if (t_obs[m] == t_rep[m]) {
          score(row, m) += 0.5;
        }
      }
    }
  }
  return score / static_cast<double>(n_rep);
}

PpcResult run_ppc(const std::vector<ChainOutput>& chains, const Dataset& data, const ModelSpec& spec, int n_rep,
                  std::uint64_t seed) {
  PpcResult r;
  r.draws = thin_draws(chains, n_rep);
  if (spec.include_outcome) r.outcome_replicates = ppc_outcome(chains, data, spec, n_rep, seed);
  r.trajectory_pvalues = ppc_trajectory_pvalues(chains, data, spec, n_rep, seed);
  return r;
}

void write_ppc_outcome_csv(const std::filesystem::path& path, const PpcResult& result, const Dataset& data) {
  std::ofstream out = open_csv(path);
  out << "draw,subject,y_rep\n";
  for (Eigen::Index k = 0; k < result.outcome_replicates.rows(); ++k) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << result.draws[static_cast<std::size_t>(k)] << ',' << data[i].id << ','
          << csv::format_double(result.outcome_replicates(k, static_cast<Eigen::Index>(i))) << '\n';
    }
  }
}

void write_ppc_pvalues_csv(const std::filesystem::path& path, const Matrix& pvalues, const Dataset& data) {
  std::ofstream out = open_csv(path);
  out << "subject,marker,pvalue\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Eigen::Index m = 0; m < pvalues.cols(); ++m)
      out << data[i].id << ',' << m + 1 << ',' << csv::format_double(pvalues(static_cast<Eigen::Index>(i), m)) << '\n';
  }
}

}  // namespace varjm
