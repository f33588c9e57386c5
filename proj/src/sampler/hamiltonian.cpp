#include "varjm/densities.hpp"
#include "varjm/sampler.hpp"

#include <cmath>

namespace varjm {

double kinetic_energy(const Vector& p, const Vector& inv_mass) {
  return 0.5 * p.cwiseProduct(inv_mass).dot(p);
}

bool leapfrog(const LogDensity& target, PhasePoint& z, double stepsize, const Vector& inv_mass) {
  z.p += 0.5 * stepsize * z.grad;
  z.u += stepsize * inv_mass.cwiseProduct(z.p);
  z.logp = target.log_density_gradient(z.u, z.grad);
  z.p += 0.5 * stepsize * z.grad;
  return std::isfinite(z.logp) && z.grad.allFinite();
}

namespace {

double hamiltonian(const PhasePoint& z, const Vector& inv_mass) {
  const double h = -z.logp + kinetic_energy(z.p, inv_mass);
  return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
}

void sample_momentum(Vector& p, const Vector& inv_mass, Rng& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index k = 0; k < p.size(); ++k) p[k] = normal(rng) / std::sqrt(inv_mass[k]);
}

bool no_u_turn(const Vector& p_sharp_minus, const Vector& p_sharp_plus, const Vector& rho) {
  return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
}

class Nuts {
 public:
  Nuts(const LogDensity& target, const Vector& inv_mass, double stepsize, double h0, Rng& rng)
      : target_(target), inv_mass_(inv_mass), stepsize_(stepsize), h0_(h0), rng_(rng) {}

  // Extends the trajectory from `z` by 2^depth steps in direction `sign`.
  // Follows the multinomial scheme with the additional cross-subtree
  // U-turn checks.
  bool build(int depth, PhasePoint& z, PhasePoint& propose, Vector& p_sharp_beg, Vector& p_sharp_end,
             Vector& rho, Vector& p_beg, Vector& p_end, double sign, double& log_sum_weight) {
    if (depth == 0) {
      const bool finite = leapfrog(target_, z, sign * stepsize_, inv_mass_);
      ++num_leapfrog;
      const double h = finite ? hamiltonian(z, inv_mass_) : std::numeric_limits<double>::infinity();
      if (h - h0_ > kMaxDeltaH) divergent = true;
      log_sum_weight = math::log_sum_exp(log_sum_weight, h0_ - h);
      sum_metro_prob += h0_ - h > 0 ? 1.0 : std::exp(h0_ - h);
      propose = z;
      p_sharp_beg = inv_mass_.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent;
    }

    const auto dim = z.u.size();
    Vector p_init_end(dim), p_sharp_init_end(dim), rho_init = Vector::Zero(dim);
    double log_sum_weight_init = math::kNegInf;
    if (!build(depth - 1, z, propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, sign,
               log_sum_weight_init))
      return false;

    PhasePoint propose_final = z;
    Vector p_final_beg(dim), p_sharp_final_beg(dim), rho_final = Vector::Zero(dim);
    double log_sum_weight_final = math::kNegInf;
    if (!build(depth - 1, z, propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end,
               sign, log_sum_weight_final))
      return false;

    const double log_sum_weight_subtree = math::log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = math::log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      propose = propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      propose = propose_final;
    }

    const Vector rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  int num_leapfrog = 0;
  double sum_metro_prob = 0.0;
  bool divergent = false;

 private:
  const LogDensity& target_;
  const Vector& inv_mass_;
  double stepsize_;
  double h0_;
  Rng& rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace

TransitionStats nuts_transition(const LogDensity& target, PhasePoint& z, double stepsize,
                                const Vector& inv_mass, int max_depth, Rng& rng) {
  const auto dim = z.u.size();
  sample_momentum(z.p, inv_mass, rng);
  const double h0 = hamiltonian(z, inv_mass);

  PhasePoint fwd = z, bck = z, sample = z, propose = z;
  Vector p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
  Vector p_sharp_fwd_fwd = inv_mass.cwiseProduct(z.p);
  Vector p_sharp_fwd_bck = p_sharp_fwd_fwd, p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
  Vector rho = z.p;
  double log_sum_weight = 0.0;

  Nuts nuts(target, inv_mass, stepsize, h0, rng);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int depth = 0;
  while (depth < max_depth) {
    Vector rho_fwd = Vector::Zero(dim), rho_bck = Vector::Zero(dim);
    double log_sum_weight_subtree = math::kNegInf;
    bool valid;
    if (uniform(rng) > 0.5) {
      rho_bck = rho;
      p_bck_fwd = p_fwd_bck;
      p_sharp_bck_fwd = p_sharp_fwd_bck;
      valid = nuts.build(depth, fwd, propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                         1.0, log_sum_weight_subtree);
    } else {
      rho_fwd = rho;
      p_fwd_bck = p_bck_fwd;
      p_sharp_fwd_bck = p_sharp_bck_fwd;
      valid = nuts.build(depth, bck, propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                         -1.0, log_sum_weight_subtree);
    }
    if (!valid) break;
    ++depth;

    if (log_sum_weight_subtree > log_sum_weight) {
      sample = propose;
    } else if (uniform(rng) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
      sample = propose;
    }
    log_sum_weight = math::log_sum_exp(log_sum_weight, log_sum_weight_subtree);

    rho = rho_bck + rho_fwd;
    bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
    persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
    persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
    if (!persist) break;
  }

  TransitionStats stats;
  stats.tree_depth = depth;
  stats.num_leapfrog = nuts.num_leapfrog;
  stats.divergent = nuts.divergent;
  stats.accept_stat = nuts.num_leapfrog > 0 ? nuts.sum_metro_prob / nuts.num_leapfrog : 0.0;
  z = sample;
  stats.energy = hamiltonian(z, inv_mass);
  return stats;
}

double initial_stepsize(const LogDensity& target, const PhasePoint& start, double stepsize,
                        const Vector& inv_mass, Rng& rng) {
  const double log_target = std::log(0.8);
  PhasePoint z = start;
  sample_momentum(z.p, inv_mass, rng);
  double h0 = hamiltonian(z, inv_mass);
  leapfrog(target, z, stepsize, inv_mass);
  double delta = h0 - hamiltonian(z, inv_mass);
  const int direction = delta > log_target ? 1 : -1;
  for (int attempt = 0; attempt < 100; ++attempt) {
    z = start;
    sample_momentum(z.p, inv_mass, rng);
    h0 = hamiltonian(z, inv_mass);
    leapfrog(target, z, stepsize, inv_mass);
    delta = h0 - hamiltonian(z, inv_mass);
    if (direction == 1 && !(delta > log_target)) break;
    if (direction == -1 && !(delta < log_target)) break;
    stepsize = direction == 1 ? 2.0 * stepsize : 0.5 * stepsize;
    if (stepsize > 1e7)
      throw SamplerError("step size search diverged upward; the posterior is probably improper");
    if (stepsize < 1e-30)
      throw SamplerError("step size search collapsed to zero; the start may sit on a boundary, try a smaller init_jitter");
  }
  return stepsize;
}

Vector random_init(const LogDensity& target, double jitter, Rng& rng) {
  std::uniform_real_distribution<double> unif(-jitter, jitter);
  Vector u(target.dim()), grad;
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = jitter > 0 ? unif(rng) : 0.0;
    const double lp = target.log_density_gradient(u, grad);
    if (std::isfinite(lp) && grad.allFinite()) return u;
  }
  throw SamplerError("no finite starting point in 100 attempts with init_jitter " + std::to_string(jitter) +
                     "; try a smaller init_jitter");
}

}  // namespace varjm
