#include "varjm/baselines.hpp"
#include "varjm/cli.hpp"
#include "varjm/csv.hpp"
#include "varjm/ppc.hpp"
#include "varjm/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace varjm {

namespace {

namespace fs = std::filesystem;

constexpr double kRhatWarning = 1.05;

struct Context {
  RunConfig config;
  std::ostream& out;
  std::ostream& err;
};

fs::path output_path(const RunConfig& c, const std::string& file) {
  fs::create_directories(c.output_dir);
  return c.output_dir / file;
}

Dataset load_data(const RunConfig& c) {
  if (c.longitudinal.empty()) throw ConfigError("'data.longitudinal' is required for this command");
  if (c.outcome.empty()) throw ConfigError("'data.outcome' is required for this command");
  Dataset data = load_dataset(c.longitudinal, c.outcome, c.csv);
  if (c.detrend_span > 0.0) data = detrend_markers(data, c.detrend_span);
  return data;
}

std::vector<Vector> data_inits(const RunConfig& c, const JointModel& model) {
  if (c.init != "data") return {};
  const Vector start = model.unconstrain(initial_state_from_data(model.data(), model.spec()));
  return std::vector<Vector>(static_cast<std::size_t>(c.sampler.chains), start);
}

struct FitOutcome {
  RunResult run;
  bool warning = false;
};

// Writes summary.csv, diagnostics.json and optionally draws.csv.
FitOutcome fit_and_report(Context& ctx, const JointModel& model) {
  const RunConfig& c = ctx.config;
  RunOptions options;
  options.workers = c.workers;
  options.inits = data_inits(c, model);
  FitOutcome fit;
  fit.run = run_chains(model, c.sampler, options);
  const auto& summary = fit.run.summary;
  write_summary_csv(output_path(c, "summary.csv").string(), summary);
  if (c.write_draws) write_draws_csv(output_path(c, "draws.csv").string(), fit.run.chains, model.parameter_names());

  double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
  bool any_defined = false;
  for (const auto& p : summary.parameters) {
    if (std::isfinite(p.rhat)) {
      max_rhat = std::max(max_rhat, p.rhat);
      any_defined = true;
    }
    if (std::isfinite(p.ess_bulk)) min_ess = std::min(min_ess, p.ess_bulk);
  }
  nlohmann::ordered_json diag;
  diag["max_rhat"] = any_defined ? max_rhat : std::numeric_limits<double>::quiet_NaN();
  diag["min_ess_bulk"] = std::isfinite(min_ess) ? min_ess : std::numeric_limits<double>::quiet_NaN();
  diag["undefined_rhat"] = summary.undefined_rhat();
  int divergences = 0, warmup_divergences = 0;
  nlohmann::ordered_json chains = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < fit.run.chains.size(); ++k) {
    const ChainOutput& ch = fit.run.chains[k];
    divergences += ch.divergence_count;
    warmup_divergences += ch.warmup_divergences;
    int saturated = 0;
    for (int d : ch.tree_depth) saturated += d >= c.sampler.max_tree_depth ? 1 : 0;
    chains.push_back({{"chain", k},
                      {"stepsize", ch.stepsize_final},
                      {"mean_accept", ch.mean_accept},
                      {"divergences", ch.divergence_count},
                      {"max_tree_depth_hits", saturated}});
  }
  diag["divergences"] = divergences;
  diag["warmup_divergences"] = warmup_divergences;
  diag["chains"] = chains;

  fit.warning = !any_defined || max_rhat > kRhatWarning || summary.undefined_rhat() > 0;
  diag["converged"] = !fit.warning;
  std::ofstream(output_path(c, "diagnostics.json")) << std::setw(2) << diag << '\n';

  ctx.out << "fit: " << model.dim() << " parameters, " << c.sampler.chains << " chains x "
          << c.sampler.num_draws() << " draws, max R-hat " << (any_defined ? max_rhat : NAN) << ", "
          << divergences << " divergent transitions\n";
  if (fit.warning) {
    ctx.err << "warning: R-hat above " << kRhatWarning
            << " (or undefined); the chains have not converged, run longer before using the results\n";
  }
  if (divergences > 0) ctx.err << "warning: " << divergences << " divergent transitions after warmup\n";
  return fit;
}

int cmd_fit(Context& ctx) {
  const Dataset data = load_data(ctx.config);
  const JointModel model(data, ctx.config.model_spec(data.num_markers(), data.num_covariates()));
  return fit_and_report(ctx, model).warning ? 2 : 0;
}

std::vector<ChainOutput> read_draws(const fs::path& path, const JointModel& model) {
  const csv::Table table = csv::read(path);
  const auto names = model.parameter_names();
  if (table.header.size() != names.size() + 2 || table.header[0] != "chain" || table.header[1] != "draw" ||
      !std::equal(names.begin(), names.end(), table.header.begin() + 2))
    throw ConfigError(path.string() + " does not match the configured model's parameters");
  std::map<long, std::vector<const std::vector<std::string>*>> by_chain;
  for (const auto& row : table.rows) by_chain[std::stol(row[0])].push_back(&row);
  std::vector<ChainOutput> chains;
  for (const auto& [id, rows] : by_chain) {
    ChainOutput ch;
    ch.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t k = 0; k < names.size(); ++k) {
        double v = 0.0;
        if (!csv::parse_double((*rows[r])[k + 2], v)) throw DataError("malformed value in " + path.string());
        ch.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
      }
    }
    chains.push_back(std::move(ch));
  }
  return chains;
}

int cmd_ppc(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Dataset data = load_data(c);
  const JointModel model(data, c.model_spec(data.num_markers(), data.num_covariates()));
  std::vector<ChainOutput> chains;
  bool warning = false;
  if (c.ppc.draws.empty()) {
    FitOutcome fit = fit_and_report(ctx, model);
    warning = fit.warning;
    chains = std::move(fit.run.chains);
  } else {
    chains = read_draws(c.ppc.draws, model);
  }
  const PpcResult res = run_ppc(chains, data, model.spec(), c.ppc.n_rep, c.ppc.seed);
  if (model.spec().include_outcome) write_ppc_outcome_csv(output_path(c, "ppc_outcome.csv"), res, data);
  write_ppc_pvalues_csv(output_path(c, "ppc_pvalues.csv"), res.trajectory_pvalues, data);
  const auto& p = res.trajectory_pvalues;
  const double central = ((p.array() >= 0.25) && (p.array() <= 0.75)).cast<double>().mean();
  const double extreme = ((p.array() < 0.01) || (p.array() > 0.99)).cast<double>().mean();
  ctx.out << "ppc: " << c.ppc.n_rep << " draws; trajectory p-values in [0.25, 0.75]: " << 100.0 * central
          << "%, below 0.01 or above 0.99: " << 100.0 * extreme << "%\n";
  return warning ? 2 : 0;
}

int cmd_baseline(Context& ctx) {
  const RunConfig& c = ctx.config;
  const Dataset data = load_data(c);
  const ModelSpec spec = c.model_spec(data.num_markers(), data.num_covariates());
  BaselineRunOptions options;
  options.workers = c.workers;
  TwoStageFit fit;
  if (c.baseline_method == "tslm") {
    fit = tslm(data, spec);
  } else if (c.baseline_method == "tslmm") {
    fit = tslmm(data, spec, c.sampler, options);
  } else {
    ModelSpec marker = spec;
    marker.include_outcome = false;
    if (c.init == "data") {
      const JointModel stage1(data, marker);
      options.inits = data_inits(c, stage1);
    }
    fit = tsiv(data, spec, c.sampler, options);
  }
  write_two_stage_csv(output_path(c, "baseline_" + c.baseline_method + ".csv").string(), fit);
  for (const auto& w : fit.warnings) ctx.err << "warning: " << w << '\n';
  bool warning = false;
  for (Eigen::Index j = 0; j < fit.rhat.size(); ++j) warning = warning || !(fit.rhat[j] <= kRhatWarning);
  ctx.out << c.baseline_method << ": " << fit.names.size() << " outcome coefficients written\n";
  if (warning) ctx.err << "warning: stage-2 R-hat above " << kRhatWarning << '\n';
  return warning ? 2 : 0;
}

int cmd_replicate(Context& ctx) {
  const RunConfig& c = ctx.config;
  ReplicationConfig rc;
  rc.truth = SimTruth::by_id(c.replicate.sim);
  if (c.replicate.num_subjects > 0) rc.truth.num_subjects = c.replicate.num_subjects;
  rc.methods = c.replicate.methods;
  rc.replicates = c.replicate.replicates;
  rc.sampler = c.sampler;
  rc.workers = c.workers;
  rc.seed = c.replicate.seed;
  rc.truth_init_jitter = c.replicate.truth_init_jitter;
  rc.output_dir = c.output_dir;
  rc.max_failure_fraction = c.replicate.max_failure_fraction;
  rc.oracle_size = c.replicate.oracle_size;
  const ReplicationReport report = run_replication(rc);

  std::ofstream targets(output_path(c, "targets.csv"));
  targets << "parameter,target\n";
  for (const auto& [name, value] : outcome_targets(rc.truth, rc.oracle_size))
    targets << name << ',' << csv::format_double(value) << '\n';

  ctx.out << report_markdown(report, rc.methods);
  return 0;
}

int cmd_simulate(Context& ctx) {
  const RunConfig& c = ctx.config;
  SimTruth truth = SimTruth::by_id(c.simulate.sim);
  if (c.simulate.num_subjects > 0) truth.num_subjects = c.simulate.num_subjects;
  const SimData sim = generate(truth, c.simulate.seed);
  save_dataset(sim.data, output_path(c, "longitudinal.csv"), output_path(c, "outcome.csv"));

  std::ofstream latent(output_path(c, "latent.csv"));
  const int q = truth.num_markers;
  latent << "subject_id";
  for (int m = 1; m <= q; ++m) latent << ",b" << m << "1,b" << m << '2';
  for (int m = 1; m <= q; ++m) latent << ",sd" << m;
  for (int k = 1; k <= q; ++k)
    for (int l = k + 1; l <= q; ++l) latent << ",r" << k << l;
  latent << '\n';
  for (std::size_t i = 0; i < sim.subjects.size(); ++i) {
    const SubjectState& s = sim.subjects[i];
    latent << sim.data[i].id;
    for (int m = 0; m < q; ++m) latent << ',' << csv::format_double(s.b(m, 0)) << ',' << csv::format_double(s.b(m, 1));
    for (int m = 0; m < q; ++m) latent << ',' << csv::format_double(std::exp(s.log_sd[m]));
    const Matrix r = s.correlation();
    for (int k = 0; k < q; ++k)
      for (int l = k + 1; l < q; ++l) latent << ',' << csv::format_double(r(k, l));
    latent << '\n';
  }
  ctx.out << "simulate: " << truth.id << ", " << sim.data.size() << " subjects, " << sim.data.total_observations()
          << " visits written to " << c.output_dir.string() << '\n';
  return 0;
}

int cmd_check_grad(Context& ctx) {
  const RunConfig& c = ctx.config;
  const auto& g = c.check_grad;
  std::optional<Dataset> data;
  if (!c.longitudinal.empty()) {
    data = load_data(c);
  } else {
    SimTruth truth = SimTruth::by_id(g.sim);
    truth.num_subjects = g.num_subjects;
    data = generate(truth, g.seed).data;
  }
  const JointModel model(*data, c.model_spec(data->num_markers(), data->num_covariates()));
  const GradientAudit audit = audit_gradient(model, g.points, g.half_width, mix_seed(g.seed, 1), g.step);
  const auto names = unconstrained_names(model.spec(), *data);
  ctx.out << "check-grad: dimension " << model.dim() << ", " << audit.points
          << " points, max relative error " << std::scientific << std::setprecision(3) << audit.max_rel_error
          << std::defaultfloat;
  if (audit.worst_coordinate >= 0) ctx.out << " at " << names[static_cast<std::size_t>(audit.worst_coordinate)];
  ctx.out << '\n';
  if (!(audit.max_rel_error < g.tolerance)) {
    ctx.err << "gradient audit failed: error above tolerance " << g.tolerance << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian joint models of longitudinal marker means and variances with a scalar outcome.", "varjm"};
  app.require_subcommand(1);
  app.footer(config_help());

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  std::optional<std::string> out_dir;

  using Command = int (*)(Context&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"fit", "fit the joint model; writes summary.csv, diagnostics.json and optionally draws.csv", cmd_fit},
      {"replicate", "run a simulation study; writes replicates.csv and the replication reports", cmd_replicate},
      {"baseline", "fit a two-stage comparison method (tslm, tslmm or tsiv)", cmd_baseline},
      {"ppc", "posterior predictive checks; writes ppc_outcome.csv and ppc_pvalues.csv", cmd_ppc},
      {"simulate", "write a dataset drawn from one of the simulation designs", cmd_simulate},
      {"check-grad", "compare the log-posterior gradient with finite differences", cmd_check_grad},
  };
  Command selected = nullptr;
  for (const auto& [name, description, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("-c,--config", config_path, "TOML configuration file");
    sub->add_option("--set", overrides, "override a configuration key, e.g. --set sampler.chains=2");
    sub->add_option("-w,--workers", workers, "parallel chains or replicates")->check(CLI::PositiveNumber);
    sub->add_option("-o,--out", out_dir, "output directory (output.dir)");
    sub->footer(config_help());
    sub->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (out_dir) overrides.push_back("output.dir=" + *out_dir);
    if (workers) overrides.push_back("run.workers=" + std::to_string(*workers));
    Context ctx{load_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt, overrides), out, err};
    return selected(ctx);
  } catch (const Error& e) {
    err << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "[cli] " << e.what() << '\n';
  }
  return 1;
}

}  // namespace varjm
