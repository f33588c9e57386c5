#pragma once

#include "varjm/common.hpp"
#include "varjm/log_density.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace varjm {

using Rng = std::mt19937_64;

struct SamplerConfig {
  int chains = 4;
  int iterations = 2000;
  int warmup = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  double init_jitter = 2.0;

  int num_draws() const { return iterations - warmup; }
  void validate() const;
};

/// Position, momentum, log density and gradient of one phase-space point.
struct PhasePoint {
  Vector u;
  Vector p;
  Vector grad;
  double logp = 0.0;
};

/// One leapfrog step of size `stepsize` under a diagonal inverse mass
/// `inv_mass`. Returns false when the new log density or gradient is not
/// finite; the caller treats that as a divergent step.
bool leapfrog(const LogDensity& target, PhasePoint& z, double stepsize, const Vector& inv_mass);

/// Kinetic energy 0.5 p' M^{-1} p.
double kinetic_energy(const Vector& p, const Vector& inv_mass);

struct TransitionStats {
  double accept_stat = 0.0;
  int tree_depth = 0;
  int num_leapfrog = 0;
  bool divergent = false;
  double energy = 0.0;
};

/// Energy error beyond which a trajectory is declared divergent.
inline constexpr double kMaxDeltaH = 1000.0;

/// One multinomial No-U-Turn transition from `z` (momentum is resampled).
/// On return `z` holds the selected point.
TransitionStats nuts_transition(const LogDensity& target, PhasePoint& z, double stepsize,
                                const Vector& inv_mass, int max_depth, Rng& rng);

/// Dual-averaging step-size adaptation.
class StepsizeAdapter {
 public:
  explicit StepsizeAdapter(double target_accept, double gamma = 0.05, double t0 = 10.0,
                           double kappa = 0.75);

  void restart(double stepsize);
  /// Returns the step size for the next iteration.
  double update(double accept_stat);
  /// Step size to use after warmup.
  double final_stepsize() const;

 private:
  double delta_, gamma_, t0_, kappa_;
  double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
  int counter_ = 0;
};

/// Welford running variance with the regularized estimate used for the
/// diagonal inverse mass.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(int dim);
  void add(const Vector& x);
  void reset();
  int count() const { return n_; }
  /// (n / (n + 5)) var + 1e-3 (5 / (n + 5)), floored at 1e-10.
  Vector regularized_variance() const;

 private:
  int n_ = 0;
  Vector mean_, m2_;
};

/// Warmup schedule: an initial fast buffer, doubling slow windows that
/// estimate the inverse mass (25, 50, 100, ...), and a terminal fast
/// buffer in which only the step size adapts.
class WarmupSchedule {
 public:
  explicit WarmupSchedule(int warmup);
  bool in_slow_window(int iteration) const;
  bool is_window_end(int iteration) const;
  const std::vector<int>& window_ends() const { return ends_; }

 private:
  int init_buffer_ = 0;
  int term_start_ = 0;
  std::vector<int> ends_;
};

/// Picks a starting step size by doubling/halving until a single leapfrog
/// step's acceptance crosses 0.8.
double initial_stepsize(const LogDensity& target, const PhasePoint& z, double stepsize,
                        const Vector& inv_mass, Rng& rng);

struct ChainOutput {
  Matrix draws;                       // (iterations - warmup) x constrained dim
  Matrix unconstrained;               // (iterations - warmup) x dim
  std::vector<double> accept_stat;
  std::vector<int> tree_depth;
  std::vector<char> divergent;
  int divergence_count = 0;
  int warmup_divergences = 0;
  double mean_accept = 0.0;
  double stepsize_final = 0.0;
  Vector mass_diag;                   // diagonal inverse mass after warmup
};

/// Runs one chain from `init` (unconstrained).
ChainOutput run_chain(const LogDensity& target, const SamplerConfig& config, const Vector& init,
                      int chain_index);

/// Uniform(-jitter, jitter) start with finite log density and gradient.
Vector random_init(const LogDensity& target, double jitter, Rng& rng);

// ---------------------------------------------------------------------------
// Diagnostics

/// Rank-normalized split R-hat: the larger of the bulk and folded-tail
/// values. Each chain is split in half. Returns NaN when every draw is
/// identical.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Rank-normalized bulk effective sample size over split chains.
double ess_bulk(const std::vector<std::vector<double>>& chains);

/// Effective sample size of the raw values (no ranking, no splitting),
/// Geyer initial-monotone truncation.
double ess_basic(const std::vector<std::vector<double>>& chains);

/// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> values, double prob);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double rhat = 0.0;
  double ess_bulk = 0.0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const;
  /// Number of parameters whose R-hat is undefined (constant draws).
  int undefined_rhat() const;
};

/// Pools the post-warmup draws of every chain.
PosteriorSummary summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& names);

/// Summary restricted to the named columns.
PosteriorSummary summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& names,
                           const std::vector<std::string>& selected);

struct RunOptions {
  int workers = 1;
  /// Per-chain unconstrained starting points; chains without one start
  /// from random_init.
  std::vector<Vector> inits;
  /// Columns to summarize; empty means all.
  std::vector<std::string> summary_names;
};

struct RunResult {
  std::vector<ChainOutput> chains;
  PosteriorSummary summary;
};

/// Runs all chains. Chain c uses the stream mix_seed(seed, c), so results do
/// not depend on `workers`.
RunResult run_chains(const LogDensity& target, const SamplerConfig& config, const RunOptions& options = {});

void write_draws_csv(const std::string& path, const std::vector<ChainOutput>& chains,
                     const std::vector<std::string>& names);
void write_summary_csv(const std::string& path, const PosteriorSummary& summary);

}  // namespace varjm
