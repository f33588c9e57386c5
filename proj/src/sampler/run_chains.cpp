#include "varjm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace varjm {

void SamplerConfig::validate() const {
  if (chains < 1) throw SamplerError("chains must be at least 1");
  if (warmup < 10) throw SamplerError("warmup must be at least 10, got " + std::to_string(warmup));
  if (iterations - warmup < 10)
    throw SamplerError("iterations - warmup must be at least 10, got " + std::to_string(iterations - warmup));
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw SamplerError("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw SamplerError("max_tree_depth must be at least 1");
  if (!(init_jitter >= 0.0)) throw SamplerError("init_jitter must be non-negative");
}

ChainOutput run_chain(const LogDensity& target, const SamplerConfig& config, const Vector& init,
                      int chain_index) {
  config.validate();
  const int dim = target.dim();
  if (init.size() != dim) throw SamplerError("initial point has the wrong dimension");
  Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(chain_index)));

  PhasePoint z;
  z.u = init;
  z.p = Vector::Zero(dim);
  z.logp = target.log_density_gradient(z.u, z.grad);
  if (!std::isfinite(z.logp) || !z.grad.allFinite())
    throw SamplerError("chain " + std::to_string(chain_index) + ": log density is not finite at the initial point");

  Vector inv_mass = Vector::Ones(dim);
  double stepsize = initial_stepsize(target, z, 1.0, inv_mass, rng);
  StepsizeAdapter adapter(config.target_accept);
  adapter.restart(stepsize);
  const WarmupSchedule schedule(config.warmup);
  VarianceEstimator variance(dim);

  ChainOutput out;
  const int draws = config.num_draws();
  const int constrained_dim = static_cast<int>(target.constrain(z.u).size());
  out.draws.resize(draws, constrained_dim);
  out.unconstrained.resize(draws, dim);
  out.accept_stat.reserve(static_cast<std::size_t>(draws));

  for (int it = 0; it < config.iterations; ++it) {
    const TransitionStats stats = nuts_transition(target, z, stepsize, inv_mass, config.max_tree_depth, rng);
    if (it < config.warmup) {
      if (stats.divergent) ++out.warmup_divergences;
      stepsize = adapter.update(stats.accept_stat);
      if (schedule.in_slow_window(it)) variance.add(z.u);
      if (schedule.is_window_end(it)) {
        inv_mass = variance.regularized_variance();
        variance.reset();
        stepsize = initial_stepsize(target, z, stepsize, inv_mass, rng);
        adapter.restart(stepsize);
      }
      if (it == config.warmup - 1) stepsize = adapter.final_stepsize();
      continue;
    }
    const int row = it - config.warmup;
    out.unconstrained.row(row) = z.u.transpose();
    out.draws.row(row) = target.constrain(z.u).transpose();
    out.accept_stat.push_back(stats.accept_stat);
    out.tree_depth.push_back(stats.tree_depth);
    out.divergent.push_back(stats.divergent ? 1 : 0);
    if (stats.divergent) ++out.divergence_count;
  }
  if (out.warmup_divergences == config.warmup)
    throw SamplerError("chain " + std::to_string(chain_index) +
                       ": every warmup transition diverged; try a smaller init_jitter");

  double total = 0.0;
  for (double a : out.accept_stat) total += a;
  out.mean_accept = total / static_cast<double>(out.accept_stat.size());
  out.stepsize_final = stepsize;
  out.mass_diag = inv_mass;
  return out;
}

RunResult run_chains(const LogDensity& target, const SamplerConfig& config, const RunOptions& options) {
  config.validate();
  const int chains = config.chains;
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::atomic<int> next{0};

  auto worker = [&] {
    for (int c = next++; c < chains; c = next++) {
      const auto idx = static_cast<std::size_t>(c);
      try {
        Vector init;
        if (idx < options.inits.size() && options.inits[idx].size() > 0) {
          init = options.inits[idx];
        } else {
          Rng init_rng(mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(c)), 0));
          init = random_init(target, config.init_jitter, init_rng);
        }
        outputs[idx] = run_chain(target, config, init, c);
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };

  const int workers = std::clamp(options.workers, 1, chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  RunResult result;
  result.summary = summarize(outputs, target.parameter_names(), options.summary_names);
  result.chains = std::move(outputs);
  return result;
}

}  // namespace varjm
