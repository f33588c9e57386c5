#pragma once

#include "varjm/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace varjm {

/// One subject's longitudinal markers, time-invariant covariates and outcome.
struct SubjectRecord {
  std::string id;
  std::vector<double> times;  // strictly increasing, length n_i
  Matrix markers;             // n_i x Q
  Vector covariates;          // length d
  double outcome = 0.0;

  Eigen::Index num_obs() const { return markers.rows(); }
};

/// Validated collection of subjects sharing Q markers and d covariates.
/// Construction enforces every invariant; a Dataset that exists is valid.
class Dataset {
 public:
  Dataset(std::vector<SubjectRecord> subjects, int num_markers, int num_covariates);

  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  const SubjectRecord& operator[](std::size_t i) const { return subjects_[i]; }
  std::size_t size() const { return subjects_.size(); }
  int num_markers() const { return num_markers_; }
  int num_covariates() const { return num_covariates_; }
  std::size_t total_observations() const;

 private:
  std::vector<SubjectRecord> subjects_;
  int num_markers_;
  int num_covariates_;
};

/// Column-name mapping for the two input tables. Empty marker/covariate
/// lists mean "infer from the header": every column after `time` in the
/// longitudinal file is a marker, every column between `subject_id` and the
/// outcome column in the outcome file is a covariate.
struct CsvSchema {
  std::string subject_column = "subject_id";
  std::string time_column = "time";
  std::vector<std::string> marker_columns;
  std::vector<std::string> covariate_columns;
  std::string outcome_column = "y";
};

Dataset load_dataset(const std::filesystem::path& longitudinal_csv,
                     const std::filesystem::path& outcome_csv,
                     const CsvSchema& schema = {});

/// Writes the canonical pair (`subject_id,time,m1..mQ` and
/// `subject_id,w1..wd,y`) with 17 significant digits.
void save_dataset(const Dataset& data, const std::filesystem::path& longitudinal_csv,
                  const std::filesystem::path& outcome_csv);

/// Result of a single-pass degree-1 lowess smooth.
struct LowessResult {
  std::vector<double> knots;   // sorted unique abscissae
  std::vector<double> fitted;  // smooth evaluated at each knot
  std::vector<double> residuals;  // value - smooth, in input order

  /// Piecewise-linear interpolation between knots; constant beyond the ends.
  double trend(double t) const;
};

/// Locally weighted linear regression with tricube weights over the
/// `span * n` nearest neighbours, no robustness iterations.
LowessResult lowess_detrend(std::span<const double> times, std::span<const double> values,
                            double span = 2.0 / 3.0);

/// Pools each marker over all subjects, removes its lowess trend in time and
/// returns a dataset holding the residual series.
Dataset detrend_markers(const Dataset& data, double span);

struct Visit {
  double time;
  double value;
};

/// (last.value - first.value) / (last.time - first.time).
double compute_rate_outcome(Visit first, Visit last);

}  // namespace varjm
