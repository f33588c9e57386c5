#pragma once

#include "varjm/data.hpp"
#include "varjm/model.hpp"
#include "varjm/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace varjm {

using ConfigValue = std::variant<std::int64_t, double, bool, std::string, std::vector<std::string>>;

enum class ConfigType { Integer, Real, Boolean, String, StringList };

/// One documented key of the run configuration, as a dotted path.
struct ConfigKey {
  std::string path;
  ConfigType type;
  ConfigValue default_value;
  std::string doc;
};

const std::vector<ConfigKey>& config_schema();

/// Every key with its type, default and description, one per line.
std::string config_help();

struct RunConfig {
  int schema_version = 1;

  std::filesystem::path longitudinal;
  std::filesystem::path outcome;
  CsvSchema csv;
  double detrend_span = 0.0;

  std::vector<std::string> features;
  OutcomeFamily family = OutcomeFamily::Gaussian;
  Parameterization parameterization = Parameterization::NonCentered;
  bool include_outcome = true;
  Hyperparameters hyper;

  SamplerConfig sampler;
  std::string init = "data";

  std::filesystem::path output_dir = "varjm_out";
  bool write_draws = false;
  int workers = 1;

  std::string baseline_method = "tslm";

  struct Replicate {
    std::string sim = "sim1_q2";
    std::vector<std::string> methods{"jmiv", "tslm", "tslmm", "tsiv"};
    int replicates = 30;
    std::uint64_t seed = 1;
    int num_subjects = 0;
    double truth_init_jitter = 0.1;
    double max_failure_fraction = 0.1;
    std::size_t oracle_size = 0;
  } replicate;

  struct Simulate {
    std::string sim = "sim1_q2";
    int num_subjects = 0;
    std::uint64_t seed = 1;
  } simulate;

  struct Ppc {
    int n_rep = 1000;
    std::uint64_t seed = 1;
    std::filesystem::path draws;
  } ppc;

  struct CheckGrad {
    std::string sim = "sim1_q2";
    int num_subjects = 20;
    int points = 50;
    double half_width = 2.0;
    double step = 1e-5;
    double tolerance = 1e-5;
    std::uint64_t seed = 1;
  } check_grad;

  /// Model specification for data with q markers and d covariates.
  ModelSpec model_spec(int q, int d) const;
};

/// Parses a TOML document, applies `overrides` ("key=value", later wins)
/// and validates. Unknown keys, wrong types and out-of-range values throw
/// ConfigError.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       const std::string& source = "<config>");

/// As parse_config on the file's contents; no file means defaults only.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides = {});

/// Entry point of the command-line tool. Exit codes: 0 success, 1 error,
/// 2 finished with a convergence warning (or a failed gradient audit).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace varjm
