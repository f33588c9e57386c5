#pragma once

#include "varjm/data.hpp"
#include "varjm/model.hpp"
#include "varjm/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace varjm {

/// Generating constants of one simulation design.
struct SimTruth {
  std::string id;                 // sim1_q2, sim2_q3 or sim3_nonlinear
  int num_markers = 2;
  std::vector<Vector> beta;       // per marker, (intercept, slope)
  std::vector<Matrix> sigma;      // per marker, 2 x 2 covariance of (b_q1, b_q2)
  Vector log_sd_mean;             // nu_q: log d_q ~ N(nu_q, psi_q^2)
  Vector log_sd_scale;            // psi_q
  std::vector<std::pair<double, double>> corr_shapes;  // per pair: (c + 1) / 2 ~ Beta
  Vector outcome_coef;            // in ModelSpec::default_features order
  double outcome_sd = 1.0;
  double quad_b21 = 0.0;          // nonlinear terms: + quad_b21 b_21^2 + quad_s11 s_11^2
  double quad_s11 = 0.0;
  int num_subjects = 1000;
  int min_obs = 6;
  int max_obs = 15;

  static SimTruth sim1();
  static SimTruth sim2();
  static SimTruth sim3();
  /// Looks up a design by id; throws SimulationError for unknown ids.
  static SimTruth by_id(const std::string& id);

  ModelSpec model_spec() const;
  bool nonlinear() const { return quad_b21 != 0.0 || quad_s11 != 0.0; }
  /// Throws SimulationError unless every covariance is positive definite
  /// and every constant is in range.
  void validate() const;
};

/// A generated dataset together with the latent subject quantities.
struct SimData {
  Dataset data;
  std::vector<SubjectState> subjects;
};

/// Draws one dataset. Observation times are 0, 1, ..., n_i - 1.
SimData generate(const SimTruth& truth, std::uint64_t seed);

/// Subject latent quantities only (no markers or outcome), for oracles
/// and generator moment checks at large N.
std::vector<SubjectState> generate_subjects(const SimTruth& truth, std::size_t n, std::uint64_t seed);

/// Linear predictor of the outcome for one subject under `truth`,
/// including the nonlinear terms.
double true_eta(const SimTruth& truth, const SubjectState& subject);

/// Coefficients of the best linear fit (no intercept, default features) to
/// the nonlinear outcome, from `n_oracle` simulated subjects with outcome
/// noise sd 0.1.
Vector sim3_target_coefficients(const SimTruth& truth, std::size_t n_oracle, std::uint64_t seed = 20170301);

/// The n_oracle -> infinity limit of sim3_target_coefficients, from exact
/// Gaussian, log-normal and Beta moments. Two-marker designs only.
Vector sim3_limit_coefficients(const SimTruth& truth);

/// Outcome-parameter values against which estimates are scored. For a
/// nonlinear design, n_oracle = 0 selects the closed-form limit.
std::map<std::string, double> outcome_targets(const SimTruth& truth, std::size_t n_oracle = 0);

/// Full parameter state at the truth: the generated subjects, population
/// values implied by the design, and the outcome block `coef`.
ParameterState truth_state(const SimTruth& truth, const SimData& sim, const Vector& coef);

// ---------------------------------------------------------------------------
// Replication

struct ReplicateRecord {
  int replicate = 0;
  std::string method;
  std::string parameter;   // empty for a failed fit
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string status;      // "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
};

struct ReportRow {
  std::string sim;
  std::string method;
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;
  double coverage_pct = 0.0;
  double avg_interval_len = 0.0;
  int r_effective = 0;
};

struct ReplicationReport {
  std::vector<ReportRow> rows;
  std::map<std::string, int> failures;  // per method
  int replicates = 0;
  double runtime_seconds = 0.0;

  const ReportRow& at(const std::string& method, const std::string& parameter) const;
};

struct ReplicationConfig {
  SimTruth truth;
  std::vector<std::string> methods{"jmiv", "tslm", "tslmm", "tsiv"};
  int replicates = 30;
  SamplerConfig sampler;
  int workers = 1;
  std::uint64_t seed = 1;
  /// Half-width of the uniform jitter added to the truth for jmiv/tsiv
  /// starting points; negative means random starts.
  double truth_init_jitter = 0.1;
  /// Directory for replicates.csv and the reports; empty keeps everything
  /// in memory.
  std::filesystem::path output_dir;
  double max_failure_fraction = 0.1;
  /// Subjects for the nonlinear-design oracle; 0 uses the closed-form limit.
  std::size_t oracle_size = 0;

  void validate() const;
};

/// Runs every (replicate, method) pair not already present in
/// output_dir/replicates.csv, appends results as they finish, and
/// aggregates. Replicate r always uses seed mix_seed(seed, r), so results do
/// not depend on `workers` or on resumption.
ReplicationReport run_replication(const ReplicationConfig& config);

/// Bias, coverage and average interval length per (method, parameter).
ReplicationReport aggregate(const std::vector<ReplicateRecord>& records, const std::string& sim,
                            const std::map<std::string, double>& targets, int replicates);

std::vector<ReplicateRecord> read_replicates_csv(const std::filesystem::path& path);
void write_replicates_csv(const std::filesystem::path& path, const std::vector<ReplicateRecord>& records);
void write_report_csv(const std::filesystem::path& path, const ReplicationReport& report);
/// Table with one block per parameter: truth, method, bias, coverage,
/// average interval length.
std::string report_markdown(const ReplicationReport& report, const std::vector<std::string>& methods);

}  // namespace varjm
