#include "varjm/csv.hpp"
#include "varjm/sampler.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace varjm {

namespace {

using Chains = std::vector<std::vector<double>>;

Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    // With an odd count the middle draw is dropped.
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

bool all_equal(const Chains& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains)
    for (double x : c)
      if (x != first) return false;
  return true;
}

// Normal scores of the pooled average ranks, (r - 3/8) / (S + 1/4).
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains)
    for (double x : c) pooled.emplace_back(x, pooled.size());
  const std::size_t total = pooled.size();
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> rank(total);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[pooled[k].second] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> normal;
  Chains out = chains;
  std::size_t idx = 0;
  for (auto& c : out)
    for (double& x : c)
      x = boost::math::quantile(normal, (rank[idx++] - 0.375) / (static_cast<double>(total) + 0.25));
  return out;
}

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double rhat_basic(const Chains& chains) {
  const double m = static_cast<double>(chains.size());
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    double ss = 0.0;
    for (double x : c) ss += (x - mu) * (x - mu);
    means.push_back(mu);
    vars.push_back(ss / (n - 1.0));
  }
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  const double w = mean_of(vars);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double ess_of(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c]);
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      const auto& x = chains[c];
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) {
    const double grand = mean_of(means);
    double v = 0.0;
    for (double mu : means) v += (mu - grand) * (mu - grand);
    var_plus += v / static_cast<double>(m - 1);
  }

  std::vector<double> rho(n, 0.0);
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  // Initial positive sequence over pairs; the last pair is left as a bias
  // term that reduces variance for antithetic chains.
  std::size_t max_t = 1;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[s + 1] = rho_even;
      rho[s + 2] = rho_odd;
    }
    max_t = s + 2;
    s += 2;
  }
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;
  // Initial monotone sequence.
  for (std::size_t t = 1; t + 3 <= max_t; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
      rho[t + 2] = rho[t + 1];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + rho[max_t + 1];
  for (std::size_t t = 0; t < max_t; ++t) tau += 2.0 * rho[t];
  return std::min(total / tau, total * std::log10(total));
}

void require_draws(const Chains& chains, std::size_t min_per_chain, const char* what) {
  if (chains.empty()) throw SamplerError(std::string(what) + ": no chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw SamplerError(std::string(what) + ": chains differ in length");
  if (n < min_per_chain)
    throw SamplerError(std::string(what) + ": needs at least " + std::to_string(min_per_chain) +
                       " draws per chain, got " + std::to_string(n));
}

}  // namespace

double split_rhat(const Chains& chains) {
  require_draws(chains, 8, "split_rhat");
  if (all_equal(chains)) return std::numeric_limits<double>::quiet_NaN();
  const Chains split = split_chains(chains);
  const double bulk = rhat_basic(rank_normalize(split));
  const double median = quantile([&] {
    std::vector<double> all;
    for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
    return all;
  }(), 0.5);
  Chains folded = split;
  for (auto& c : folded)
    for (double& x : c) x = std::abs(x - median);
  const double tail = all_equal(folded) ? bulk : rhat_basic(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess_bulk(const Chains& chains) {
  require_draws(chains, 8, "ess_bulk");
  if (all_equal(chains)) return std::numeric_limits<double>::quiet_NaN();
  return ess_of(rank_normalize(split_chains(chains)));
}

double ess_basic(const Chains& chains) {
  require_draws(chains, 4, "ess_basic");
  if (all_equal(chains)) return std::numeric_limits<double>::quiet_NaN();
  return ess_of(chains);
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw SamplerError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw SamplerError("no summary for parameter '" + name + "'");
}

int PosteriorSummary::undefined_rhat() const {
  return static_cast<int>(std::count_if(parameters.begin(), parameters.end(),
                                        [](const ParameterSummary& p) { return std::isnan(p.rhat); }));
}

PosteriorSummary summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& names) {
  return summarize(chains, names, {});
}

PosteriorSummary summarize(const std::vector<ChainOutput>& chains, const std::vector<std::string>& names,
                           const std::vector<std::string>& selected) {
  std::vector<std::size_t> columns;
  if (selected.empty()) {
    columns.resize(names.size());
    std::iota(columns.begin(), columns.end(), 0);
  } else {
    for (const auto& s : selected) {
      const auto it = std::find(names.begin(), names.end(), s);
      if (it == names.end()) throw SamplerError("no draws column named '" + s + "'");
      columns.push_back(static_cast<std::size_t>(it - names.begin()));
    }
  }

  PosteriorSummary out;
  for (std::size_t col : columns) {
    Chains per_chain;
    std::vector<double> pooled;
    for (const auto& c : chains) {
      const auto idx = static_cast<Eigen::Index>(col);
      std::vector<double> v(static_cast<std::size_t>(c.draws.rows()));
      for (Eigen::Index r = 0; r < c.draws.rows(); ++r) v[static_cast<std::size_t>(r)] = c.draws(r, idx);
      pooled.insert(pooled.end(), v.begin(), v.end());
      per_chain.push_back(std::move(v));
    }
    ParameterSummary p;
    p.name = names[col];
    p.mean = mean_of(pooled);
    double ss = 0.0;
    for (double x : pooled) ss += (x - p.mean) * (x - p.mean);
    p.sd = std::sqrt(ss / static_cast<double>(pooled.size() - 1));
    p.q025 = quantile(pooled, 0.025);
    p.q975 = quantile(pooled, 0.975);
    p.rhat = split_rhat(per_chain);
    p.ess_bulk = ess_bulk(per_chain);
    out.parameters.push_back(std::move(p));
  }
  return out;
}

void write_draws_csv(const std::string& path, const std::vector<ChainOutput>& chains,
                     const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw SamplerError("cannot write " + path);
  out << "chain,draw";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const Matrix& d = chains[c].draws;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      out << c << ',' << r;
      for (Eigen::Index k = 0; k < d.cols(); ++k) out << ',' << csv::format_double(d(r, k));
      out << '\n';
    }
  }
}

void write_summary_csv(const std::string& path, const PosteriorSummary& summary) {
  std::ofstream out(path);
  if (!out) throw SamplerError("cannot write " + path);
  out << "parameter,mean,sd,q2.5,q97.5,rhat,ess_bulk\n";
  for (const auto& p : summary.parameters) {
    out << p.name << ',' << csv::format_double(p.mean) << ',' << csv::format_double(p.sd) << ','
        << csv::format_double(p.q025) << ',' << csv::format_double(p.q975) << ',' << csv::format_double(p.rhat)
        << ',' << csv::format_double(p.ess_bulk) << '\n';
  }
}

}  // namespace varjm
