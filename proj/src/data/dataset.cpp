#include "varjm/csv.hpp"
#include "varjm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace varjm {

namespace {

// Integer-looking ids sort numerically, everything else lexicographically.
bool id_less(const std::string& a, const std::string& b) {
  long long ia = 0, ib = 0;
  const auto ra = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto rb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool a_int = ra.ec == std::errc() && ra.ptr == a.data() + a.size();
  const bool b_int = rb.ec == std::errc() && rb.ptr == b.data() + b.size();
  if (a_int && b_int) return ia < ib;
  if (a_int != b_int) return a_int;
  return a < b;
}

double parse_field(const std::string& text, const std::string& source, std::size_t row,
                   const std::string& column) {
  double value = 0.0;
  if (!csv::parse_double(text, value) || !std::isfinite(value)) {
    throw DataError(source + " row " + std::to_string(row) + ", column '" + column +
                    "': non-finite or missing value '" + text + "'");
  }
  return value;
}

std::vector<std::string> infer_columns(const csv::Table& table, std::size_t first,
                                       std::size_t last) {
  std::vector<std::string> cols;
  for (std::size_t i = first; i < last; ++i) cols.push_back(table.header[i]);
  return cols;
}

}  // namespace

Dataset::Dataset(std::vector<SubjectRecord> subjects, int num_markers, int num_covariates)
    : subjects_(std::move(subjects)), num_markers_(num_markers), num_covariates_(num_covariates) {
  if (num_markers_ < 1) throw DataError("need at least one marker");
  if (num_covariates_ < 0) throw DataError("negative covariate count");
  if (subjects_.size() < 2) throw DataError("need at least 2 subjects, got " + std::to_string(subjects_.size()));
  for (const auto& s : subjects_) {
    if (s.markers.cols() != num_markers_) {
      throw DataError("subject " + s.id + ": expected " + std::to_string(num_markers_) +
                      " marker columns, got " + std::to_string(s.markers.cols()));
    }
    if (s.covariates.size() != num_covariates_) {
      throw DataError("subject " + s.id + ": expected " + std::to_string(num_covariates_) +
                      " covariates, got " + std::to_string(s.covariates.size()));
    }
    if (static_cast<Eigen::Index>(s.times.size()) != s.markers.rows()) {
      throw DataError("subject " + s.id + ": time and marker row counts differ");
    }
    if (s.times.size() < 2) {
      throw DataError("subject " + s.id + " has fewer than 2 observations");
    }
    for (std::size_t j = 1; j < s.times.size(); ++j) {
      if (!(s.times[j] > s.times[j - 1])) {
        throw DataError("subject " + s.id + ": observation times not strictly increasing at t=" +
                        csv::format_double(s.times[j]));
      }
    }
    if (!s.markers.allFinite() || !s.covariates.allFinite() || !std::isfinite(s.outcome) ||
        !std::all_of(s.times.begin(), s.times.end(), [](double t) { return std::isfinite(t); })) {
      throw DataError("subject " + s.id + " has non-finite values");
    }
  }
}

std::size_t Dataset::total_observations() const {
  return std::accumulate(subjects_.begin(), subjects_.end(), std::size_t{0},
                         [](std::size_t acc, const SubjectRecord& s) {
                           return acc + static_cast<std::size_t>(s.num_obs());
                         });
}

Dataset load_dataset(const std::filesystem::path& longitudinal_csv,
                     const std::filesystem::path& outcome_csv, const CsvSchema& schema) {
  const auto long_name = longitudinal_csv.string();
  const auto out_name = outcome_csv.string();
  if (!std::filesystem::exists(longitudinal_csv)) throw DataError("file not found: " + long_name);
  if (!std::filesystem::exists(outcome_csv)) throw DataError("file not found: " + out_name);
  const auto long_table = csv::read(longitudinal_csv);
  const auto out_table = csv::read(outcome_csv);

  auto require = [](const csv::Table& t, const std::string& col, const std::string& src) {
    const int idx = t.column(col);
    if (idx < 0) throw DataError(src + ": missing column '" + col + "'");
    return idx;
  };

  const int sid_col = require(long_table, schema.subject_column, long_name);
  const int time_col = require(long_table, schema.time_column, long_name);
  auto marker_names = schema.marker_columns;
  if (marker_names.empty()) {
    marker_names = infer_columns(long_table, static_cast<std::size_t>(std::max(sid_col, time_col) + 1),
                                 long_table.header.size());
  }
  if (marker_names.empty()) throw DataError(long_name + ": no marker columns");
  std::vector<int> marker_cols;
  for (const auto& m : marker_names) marker_cols.push_back(require(long_table, m, long_name));

  const int out_sid_col = require(out_table, schema.subject_column, out_name);
  const int y_col = require(out_table, schema.outcome_column, out_name);
  auto cov_names = schema.covariate_columns;
  if (cov_names.empty() && y_col > out_sid_col + 1) {
    cov_names = infer_columns(out_table, static_cast<std::size_t>(out_sid_col + 1),
                              static_cast<std::size_t>(y_col));
  }
  std::vector<int> cov_cols;
  for (const auto& c : cov_names) cov_cols.push_back(require(out_table, c, out_name));

  const int q = static_cast<int>(marker_cols.size());
  const int d = static_cast<int>(cov_cols.size());

  struct Row {
    double time;
    std::vector<double> values;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>> by_subject;
  for (std::size_t r = 0; r < long_table.rows.size(); ++r) {
    const auto& fields = long_table.rows[r];
    const std::size_t line = r + 2;  // header is line 1
    Row row;
    row.line = line;
    row.time = parse_field(fields[time_col], long_name, line, schema.time_column);
    for (int k = 0; k < q; ++k) {
      row.values.push_back(parse_field(fields[marker_cols[k]], long_name, line, marker_names[k]));
    }
    by_subject[fields[sid_col]].push_back(std::move(row));
  }

  struct OutcomeRow {
    Vector covariates;
    double y;
    std::size_t line;
  };
  std::map<std::string, OutcomeRow> outcomes;
  for (std::size_t r = 0; r < out_table.rows.size(); ++r) {
    const auto& fields = out_table.rows[r];
    const std::size_t line = r + 2;
    OutcomeRow o;
    o.line = line;
    o.covariates.resize(d);
    for (int k = 0; k < d; ++k) o.covariates[k] = parse_field(fields[cov_cols[k]], out_name, line, cov_names[k]);
    o.y = parse_field(fields[y_col], out_name, line, schema.outcome_column);
    const auto& id = fields[out_sid_col];
    if (!outcomes.emplace(id, std::move(o)).second) {
      throw DataError(out_name + " row " + std::to_string(line) + ": duplicate subject " + id);
    }
  }

  std::vector<SubjectRecord> subjects;
  for (auto& [id, rows] : by_subject) {
    const auto it = outcomes.find(id);
    if (it == outcomes.end()) {
      throw DataError("subject " + id + " (" + long_name + " row " + std::to_string(rows.front().line) +
                      ") is absent from the outcome table");
    }
    if (rows.size() < 2) {
      throw DataError("subject " + id + " (" + long_name + " row " + std::to_string(rows.front().line) +
                      ") has fewer than 2 observations");
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    SubjectRecord s;
    s.id = id;
    s.markers.resize(static_cast<Eigen::Index>(rows.size()), q);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j > 0 && rows[j].time == rows[j - 1].time) {
        throw DataError("subject " + id + " (" + long_name + " row " + std::to_string(rows[j].line) +
                        "): duplicate observation time " + csv::format_double(rows[j].time));
      }
      s.times.push_back(rows[j].time);
      for (int k = 0; k < q; ++k) s.markers(static_cast<Eigen::Index>(j), k) = rows[j].values[k];
    }
    s.covariates = it->second.covariates;
    s.outcome = it->second.y;
    subjects.push_back(std::move(s));
  }
  for (const auto& [id, o] : outcomes) {
    if (!by_subject.contains(id)) {
      throw DataError("subject " + id + " (" + out_name + " row " + std::to_string(o.line) +
                      ") has no longitudinal observations");
    }
  }
  std::sort(subjects.begin(), subjects.end(),
            [](const SubjectRecord& a, const SubjectRecord& b) { return id_less(a.id, b.id); });
  return Dataset(std::move(subjects), q, d);
}

void save_dataset(const Dataset& data, const std::filesystem::path& longitudinal_csv,
                  const std::filesystem::path& outcome_csv) {
  std::ofstream lf(longitudinal_csv);
  if (!lf) throw DataError("cannot write " + longitudinal_csv.string());
  lf << "subject_id,time";
  for (int q = 0; q < data.num_markers(); ++q) lf << ",m" << q + 1;
  lf << '\n';
  for (const auto& s : data.subjects()) {
    for (Eigen::Index j = 0; j < s.num_obs(); ++j) {
      lf << s.id << ',' << csv::format_double(s.times[static_cast<std::size_t>(j)]);
      for (int q = 0; q < data.num_markers(); ++q) lf << ',' << csv::format_double(s.markers(j, q));
      lf << '\n';
    }
  }

  std::ofstream of(outcome_csv);
  if (!of) throw DataError("cannot write " + outcome_csv.string());
  of << "subject_id";
  for (int k = 0; k < data.num_covariates(); ++k) of << ",w" << k + 1;
  of << ",y\n";
  for (const auto& s : data.subjects()) {
    of << s.id;
    for (int k = 0; k < data.num_covariates(); ++k) of << ',' << csv::format_double(s.covariates[k]);
    of << ',' << csv::format_double(s.outcome) << '\n';
  }
}

Dataset detrend_markers(const Dataset& data, double span) {
  auto subjects = data.subjects();
  for (int q = 0; q < data.num_markers(); ++q) {
    std::vector<double> times, values;
    times.reserve(data.total_observations());
    values.reserve(data.total_observations());
    for (const auto& s : subjects) {
      for (Eigen::Index j = 0; j < s.num_obs(); ++j) {
        times.push_back(s.times[static_cast<std::size_t>(j)]);
        values.push_back(s.markers(j, q));
      }
    }
    const auto fit = lowess_detrend(times, values, span);
    std::size_t k = 0;
    for (auto& s : subjects) {
      for (Eigen::Index j = 0; j < s.num_obs(); ++j) s.markers(j, q) = fit.residuals[k++];
    }
  }
  return Dataset(std::move(subjects), data.num_markers(), data.num_covariates());
}

double compute_rate_outcome(Visit first, Visit last) {
  if (!(last.time > first.time)) {
    throw DataError("rate outcome needs last visit after first visit (got t_first=" +
                    csv::format_double(first.time) + ", t_last=" + csv::format_double(last.time) + ")");
  }
  return (last.value - first.value) / (last.time - first.time);
}

}  // namespace varjm
