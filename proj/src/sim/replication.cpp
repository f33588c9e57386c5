#include "varjm/baselines.hpp"
#include "varjm/csv.hpp"
#include "varjm/sim.hpp"

#include <algorithm>
#include <cctype>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace varjm {

namespace {

const std::vector<std::string> kMethods{"jmiv", "tslm", "tslmm", "tsiv"};

std::string sanitize(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return text;
}

std::vector<Vector> jittered_inits(const Vector& center, int chains, double jitter, std::uint64_t seed) {
  std::vector<Vector> out;
  for (int c = 0; c < chains; ++c) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    std::uniform_real_distribution<double> unif(-jitter, jitter);
    Vector u = center;
    for (Eigen::Index k = 0; k < u.size(); ++k) u[k] += jitter > 0.0 ? unif(rng) : 0.0;
    out.push_back(std::move(u));
  }
  return out;
}

struct MethodContext {
  const SimTruth& truth;
  const SimData& sim;
  const Vector& targets;
  SamplerConfig sampler;
  double jitter;
  int replicate;
};

void push_estimates(std::vector<ReplicateRecord>& out, const MethodContext& ctx, const std::string& method,
                    const std::vector<std::string>& names, const Vector& est, const Vector& lo, const Vector& hi) {
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out.push_back({ctx.replicate, method, names[j], est[k], lo[k], hi[k], "ok"});
  }
}

std::vector<ReplicateRecord> fit_method(const std::string& method, const MethodContext& ctx) {
  const ModelSpec spec = ctx.truth.model_spec();
  const auto names = spec.coefficient_names();
  std::vector<ReplicateRecord> out;
  if (method == "tslm") {
    const TwoStageFit fit = tslm(ctx.sim.data, spec);
    push_estimates(out, ctx, method, names, fit.estimate, fit.lower, fit.upper);
  } else if (method == "tslmm") {
    const TwoStageFit fit = tslmm(ctx.sim.data, spec, ctx.sampler);
    push_estimates(out, ctx, method, names, fit.estimate, fit.lower, fit.upper);
  } else if (method == "tsiv") {
    BaselineRunOptions options;
    if (ctx.jitter >= 0.0) {
      ModelSpec marker_spec = spec;
      marker_spec.include_outcome = false;
      const JointModel marker(ctx.sim.data, marker_spec);
      const Vector center = marker.unconstrain(truth_state(ctx.truth, ctx.sim, ctx.targets));
      options.inits = jittered_inits(center, ctx.sampler.chains, ctx.jitter, mix_seed(ctx.sampler.seed, 77));
    }
    const TwoStageFit fit = tsiv(ctx.sim.data, spec, ctx.sampler, options);
    push_estimates(out, ctx, method, names, fit.estimate, fit.lower, fit.upper);
  } else if (method == "jmiv") {
    const JointModel model(ctx.sim.data, spec);
    RunOptions options;
    options.summary_names = names;
    if (ctx.jitter >= 0.0) {
      const Vector center = model.unconstrain(truth_state(ctx.truth, ctx.sim, ctx.targets));
      options.inits = jittered_inits(center, ctx.sampler.chains, ctx.jitter, mix_seed(ctx.sampler.seed, 77));
    }
    const RunResult run = run_chains(model, ctx.sampler, options);
    for (const auto& name : names) {
      const auto& s = run.summary.at(name);
      out.push_back({ctx.replicate, method, name, s.mean, s.q025, s.q975, "ok"});
    }
  } else {
    throw SimulationError("unknown method '" + method + "'");
  }
  return out;
}

std::string config_fingerprint(const ReplicationConfig& c) {
  std::ostringstream out;
  out << "sim=" << c.truth.id << "\nsubjects=" << c.truth.num_subjects << "\nseed=" << c.seed
      << "\nchains=" << c.sampler.chains << "\niterations=" << c.sampler.iterations
      << "\nwarmup=" << c.sampler.warmup << "\ntarget_accept=" << csv::format_double(c.sampler.target_accept)
      << "\nmax_tree_depth=" << c.sampler.max_tree_depth << "\nsampler_seed=" << c.sampler.seed
      << "\ninit_jitter=" << csv::format_double(c.sampler.init_jitter)
      << "\ntruth_init_jitter=" << csv::format_double(c.truth_init_jitter) << '\n';
  return out.str();
}

int method_rank(const std::vector<std::string>& methods, const std::string& m) {
  const auto it = std::find(methods.begin(), methods.end(), m);
  return it == methods.end() ? static_cast<int>(methods.size()) : static_cast<int>(it - methods.begin());
}

std::string format_fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const ReportRow& ReplicationReport::at(const std::string& method, const std::string& parameter) const {
  for (const auto& r : rows)
    if (r.method == method && r.parameter == parameter) return r;
  throw SimulationError("no report row for " + method + "/" + parameter);
}

void ReplicationConfig::validate() const {
  truth.validate();
  sampler.validate();
  if (replicates < 1) throw SimulationError("need at least one replicate");
  if (workers < 1) throw SimulationError("workers must be at least 1");
  if (methods.empty()) throw SimulationError("no methods selected");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw SimulationError("unknown method '" + m + "' (expected jmiv, tslm, tslmm or tsiv)");
    if (!seen.insert(m).second) throw SimulationError("method '" + m + "' listed twice");
  }
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw SimulationError("max_failure_fraction must lie in [0, 1]");
}

std::vector<ReplicateRecord> read_replicates_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const std::vector<std::string> expected{"replicate", "method", "parameter", "estimate", "lower", "upper", "status"};
  if (table.header != expected) throw SimulationError(path.string() + " does not have the replicate-table header");
  std::vector<ReplicateRecord> out;
  for (const auto& row : table.rows) {
    ReplicateRecord r;
    double rep = 0.0;
    if (!csv::parse_double(row[0], rep) || !csv::parse_double(row[3], r.estimate) ||
        !csv::parse_double(row[4], r.lower) || !csv::parse_double(row[5], r.upper))
      throw SimulationError("malformed row in " + path.string());
    r.replicate = static_cast<int>(rep);
    r.method = row[1];
    r.parameter = row[2];
    r.status = row[6];
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

void write_record(std::ostream& out, const ReplicateRecord& r) {
  out << r.replicate << ',' << r.method << ',' << r.parameter << ',' << csv::format_double(r.estimate) << ','
      << csv::format_double(r.lower) << ',' << csv::format_double(r.upper) << ',' << sanitize(r.status) << '\n';
}

}  // namespace

void write_replicates_csv(const std::filesystem::path& path, const std::vector<ReplicateRecord>& records) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw SimulationError("cannot write " + tmp.string());
    out << "replicate,method,parameter,estimate,lower,upper,status\n";
    for (const auto& r : records) write_record(out, r);
  }
  std::filesystem::rename(tmp, path);
}

ReplicationReport aggregate(const std::vector<ReplicateRecord>& records, const std::string& sim,
                            const std::map<std::string, double>& targets, int replicates) {
  ReplicationReport report;
  report.replicates = replicates;
  std::vector<std::string> methods, params;
  std::map<std::string, std::set<int>> failed;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (!r.ok()) {
      failed[r.method].insert(r.replicate);
      continue;
    }
    if (std::find(params.begin(), params.end(), r.parameter) == params.end()) params.push_back(r.parameter);
  }
  for (const auto& m : methods) {
    report.failures[m] = static_cast<int>(failed[m].size());
    for (const auto& p : params) {
      const auto t = targets.find(p);
      if (t == targets.end()) continue;
      ReportRow row;
      row.sim = sim;
      row.method = m;
      row.parameter = p;
      row.truth = t->second;
      double bias = 0.0, covered = 0.0, length = 0.0;
      for (const auto& r : records) {
        if (!r.ok() || r.method != m || r.parameter != p) continue;
        ++row.r_effective;
        bias += r.estimate - row.truth;
        covered += (r.lower <= row.truth && row.truth <= r.upper) ? 1.0 : 0.0;
        length += r.upper - r.lower;
      }
      if (row.r_effective == 0) continue;
      const double n = row.r_effective;
      row.bias = bias / n;
      row.coverage_pct = 100.0 * covered / n;
      row.avg_interval_len = length / n;
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path, const ReplicationReport& report) {
  std::ofstream out(path);
  if (!out) throw SimulationError("cannot write " + path.string());
  out << "sim,method,parameter,truth,bias,coverage_pct,avg_interval_len,R_effective\n";
  for (const auto& r : report.rows)
    out << r.sim << ',' << r.method << ',' << r.parameter << ',' << csv::format_double(r.truth) << ','
        << csv::format_double(r.bias) << ',' << csv::format_double(r.coverage_pct) << ','
        << csv::format_double(r.avg_interval_len) << ',' << r.r_effective << '\n';
}

std::string report_markdown(const ReplicationReport& report, const std::vector<std::string>& methods) {
  std::vector<std::string> params;
  for (const auto& r : report.rows)
    if (std::find(params.begin(), params.end(), r.parameter) == params.end()) params.push_back(r.parameter);
  std::ostringstream out;
  out << "| Truth | Model | Bias | Coverage (%) | Average Interval Length |\n";
  out << "|---|---|---:|---:|---:|\n";
  for (const auto& p : params) {
    bool first = true;
    for (const auto& m : methods) {
      const auto it = std::find_if(report.rows.begin(), report.rows.end(),
                                   [&](const ReportRow& r) { return r.method == m && r.parameter == p; });
      if (it == report.rows.end()) continue;
      char truth[64];
      std::snprintf(truth, sizeof truth, "%s = %g", p.c_str(), it->truth);
      out << "| " << (first ? truth : "") << " | " << upper(m) << " | " << format_fixed(it->bias, 2) << " | "
          << format_fixed(it->coverage_pct, 1) << " | " << format_fixed(it->avg_interval_len, 2) << " |\n";
      first = false;
    }
  }
  bool any_failed = false;
  for (const auto& [m, n] : report.failures) any_failed = any_failed || n > 0;
  if (any_failed) {
    out << "\nFailed fits excluded:";
    for (const auto& m : methods) {
      const auto it = report.failures.find(m);
      if (it != report.failures.end() && it->second > 0) out << ' ' << upper(m) << ' ' << it->second << '/' << report.replicates;
    }
    out << '\n';
  }
  return out.str();
}

ReplicationReport run_replication(const ReplicationConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto targets_map = outcome_targets(config.truth, config.oracle_size);
  const auto names = config.truth.model_spec().coefficient_names();
  Vector targets(static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) targets[static_cast<Eigen::Index>(j)] = targets_map.at(names[j]);

  std::vector<ReplicateRecord> records;
  std::ofstream stream;
  std::filesystem::path table_path;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    table_path = config.output_dir / "replicates.csv";
    const auto fingerprint_path = config.output_dir / "replication_config.txt";
    const std::string fingerprint = config_fingerprint(config);
    if (std::filesystem::exists(table_path)) {
      std::ifstream in(fingerprint_path);
      std::stringstream previous;
      previous << in.rdbuf();
      if (previous.str() != fingerprint)
        throw SimulationError("checkpoint in " + config.output_dir.string() +
                              " was written with a different configuration; use a fresh output directory");
      for (auto& r : read_replicates_csv(table_path))
        if (r.replicate < config.replicates && method_rank(config.methods, r.method) < static_cast<int>(config.methods.size()))
          records.push_back(std::move(r));
    } else {
      std::ofstream(fingerprint_path) << fingerprint;
    }
    write_replicates_csv(table_path, records);
    stream.open(table_path, std::ios::app);
    if (!stream) throw SimulationError("cannot append to " + table_path.string());
  }

  std::set<std::pair<int, std::string>> done;
  std::map<std::string, int> failures;
  for (const auto& r : records) {
    if (done.insert({r.replicate, r.method}).second && !r.ok()) ++failures[r.method];
  }
  struct Task {
    int replicate;
    std::vector<std::string> methods;
  };
  std::vector<Task> tasks;
  for (int r = 0; r < config.replicates; ++r) {
    Task t{r, {}};
    for (const auto& m : config.methods)
      if (!done.count({r, m})) t.methods.push_back(m);
    if (!t.methods.empty()) tasks.push_back(std::move(t));
  }

  const double cap = config.max_failure_fraction * config.replicates;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::string abort_reason;
  auto worker = [&] {
    while (!abort) {
      const std::size_t idx = next++;
      if (idx >= tasks.size()) return;
      const Task& task = tasks[idx];
      const std::uint64_t rep_seed = mix_seed(config.seed, static_cast<std::uint64_t>(task.replicate));
      SimTruth truth = config.truth;
      std::optional<SimData> sim;
      std::string generate_error;
      try {
        sim = generate(truth, rep_seed);
      } catch (const std::exception& e) {
        generate_error = e.what();
      }
      for (const auto& method : task.methods) {
        if (abort) return;
        std::vector<ReplicateRecord> out;
        std::string error = generate_error;
        if (sim) {
          SamplerConfig sampler = config.sampler;
          sampler.seed = mix_seed(rep_seed, 1000 + static_cast<std::uint64_t>(method_rank(kMethods, method)));
          const MethodContext ctx{truth, *sim, targets, sampler, config.truth_init_jitter, task.replicate};
          try {
            out = fit_method(method, ctx);
          } catch (const std::exception& e) {
            error = e.what();
          }
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (!error.empty()) out = {{task.replicate, method, "-", nan, nan, nan, "failed: " + sanitize(error)}};
        std::lock_guard<std::mutex> lock(mutex);
        for (const auto& r : out) {
          if (stream.is_open()) write_record(stream, r);
          records.push_back(r);
        }
        if (stream.is_open()) stream.flush();
        if (!error.empty() && ++failures[method] > cap && !abort) {
          abort = true;
          abort_reason = method + " failed in " + std::to_string(failures[method]) + " of " +
                         std::to_string(config.replicates) + " replicates (last error: " + error + ")";
        }
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(config.workers, static_cast<int>(tasks.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (stream.is_open()) stream.close();

  std::stable_sort(records.begin(), records.end(), [&](const ReplicateRecord& a, const ReplicateRecord& b) {
    if (a.replicate != b.replicate) return a.replicate < b.replicate;
    return method_rank(config.methods, a.method) < method_rank(config.methods, b.method);
  });
  if (!table_path.empty()) write_replicates_csv(table_path, records);
  if (abort) throw SimulationError("aborting: " + abort_reason);

  ReplicationReport report = aggregate(records, config.truth.id, targets_map, config.replicates);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!config.output_dir.empty()) {
    write_report_csv(config.output_dir / "replication_report.csv", report);
    std::ofstream(config.output_dir / "replication_report.md") << report_markdown(report, config.methods);
  }
  return report;
}

}  // namespace varjm
