#include "varjm/cli.hpp"

#include "varjm/csv.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace varjm {

namespace {

using Strings = std::vector<std::string>;
using I = std::int64_t;

const std::vector<ConfigKey> kSchema = {
    {"schema_version", ConfigType::Integer, I{1}, "configuration schema version; must be 1"},

    {"data.longitudinal", ConfigType::String, std::string(), "longitudinal CSV: subject, time, one column per marker"},
    {"data.outcome", ConfigType::String, std::string(), "outcome CSV: subject, covariates, outcome"},
    {"data.subject_column", ConfigType::String, std::string("subject_id"), "subject id column in both files"},
    {"data.time_column", ConfigType::String, std::string("time"), "time column of the longitudinal file"},
    {"data.marker_columns", ConfigType::StringList, Strings{}, "marker columns; empty takes every column after time"},
    {"data.covariate_columns", ConfigType::StringList, Strings{}, "covariate columns; empty takes every column between subject and outcome"},
    {"data.outcome_column", ConfigType::String, std::string("y"), "outcome column"},
    {"data.detrend_span", ConfigType::Real, 0.0, "lowess span for removing each marker's pooled time trend; 0 disables"},

    {"model.features", ConfigType::StringList, Strings{}, "outcome features such as b11, s12, r12, w1, s11*s22; empty uses all b, s and w terms"},
    {"model.family", ConfigType::String, std::string("gaussian"), "outcome family: gaussian or mixture"},
    {"model.parameterization", ConfigType::String, std::string("noncentered"), "subject coefficients: noncentered or centered"},
    {"model.include_outcome", ConfigType::Boolean, true, "false fits the marker submodel only"},
    {"model.hyper.m", ConfigType::Real, 0.0, "prior mean of beta and nu"},
    {"model.hyper.xi", ConfigType::Real, 10.0, "prior sd of beta and nu"},
    {"model.hyper.tau", ConfigType::Real, 2.5, "half-Cauchy scale of psi"},
    {"model.hyper.kappa", ConfigType::Real, 0.1, "exponential rate of a'"},
    {"model.hyper.kappa_prime", ConfigType::Real, 0.1, "exponential rate of b'"},
    {"model.hyper.tau0", ConfigType::Real, 2.5, "half-Cauchy scale of the random-effect sds"},
    {"model.hyper.zeta", ConfigType::Real, 1.0, "LKJ shape of the random-effect correlation"},
    {"model.hyper.tau1", ConfigType::Real, 2.5, "half-Cauchy scale of the outcome sd (first mixture sd)"},
    {"model.hyper.tau2", ConfigType::Real, 5.0, "half-Cauchy scale of the second mixture sd"},
    {"model.hyper.coef_sd", ConfigType::Real, 10.0, "prior sd of the outcome coefficients"},

    {"sampler.chains", ConfigType::Integer, I{4}, "number of chains"},
    {"sampler.iterations", ConfigType::Integer, I{2000}, "iterations per chain, warmup included"},
    {"sampler.warmup", ConfigType::Integer, I{1000}, "warmup iterations per chain"},
    {"sampler.target_accept", ConfigType::Real, 0.8, "step-size adaptation target"},
    {"sampler.max_tree_depth", ConfigType::Integer, I{10}, "maximum NUTS tree depth"},
    {"sampler.seed", ConfigType::Integer, I{1}, "base seed; chain c uses a stream derived from (seed, c)"},
    {"sampler.init_jitter", ConfigType::Real, 2.0, "half-width of uniform random starting points"},
    {"sampler.init", ConfigType::String, std::string("data"), "starting points: data (moment estimates) or random"},

    {"output.dir", ConfigType::String, std::string("varjm_out"), "output directory"},
    {"output.write_draws", ConfigType::Boolean, false, "also write draws.csv"},

    {"run.workers", ConfigType::Integer, I{1}, "parallel chains or replicates; --workers overrides"},

    {"baseline.method", ConfigType::String, std::string("tslm"), "two-stage method: tslm, tslmm or tsiv"},

    {"replicate.sim", ConfigType::String, std::string("sim1_q2"), "design: sim1_q2, sim2_q3 or sim3_nonlinear"},
    {"replicate.methods", ConfigType::StringList, Strings{"jmiv", "tslm", "tslmm", "tsiv"}, "methods to fit per replicate"},
    {"replicate.replicates", ConfigType::Integer, I{30}, "number of replicates"},
    {"replicate.seed", ConfigType::Integer, I{1}, "base seed; replicate r uses a stream derived from (seed, r)"},
    {"replicate.num_subjects", ConfigType::Integer, I{0}, "subjects per dataset; 0 keeps the design's 1000"},
    {"replicate.truth_init_jitter", ConfigType::Real, 0.1, "half-width of the jitter around the truth for jmiv and tsiv starts"},
    {"replicate.max_failure_fraction", ConfigType::Real, 0.1, "abort once a method fails on more than this fraction"},
    {"replicate.oracle_size", ConfigType::Integer, I{0}, "subjects for the nonlinear-design oracle; 0 uses the exact limit"},

    {"simulate.sim", ConfigType::String, std::string("sim1_q2"), "design to draw from"},
    {"simulate.num_subjects", ConfigType::Integer, I{0}, "subjects; 0 keeps the design's 1000"},
    {"simulate.seed", ConfigType::Integer, I{1}, "generator seed"},

    {"ppc.n_rep", ConfigType::Integer, I{1000}, "posterior draws used, evenly thinned"},
    {"ppc.seed", ConfigType::Integer, I{1}, "seed for the replicated data"},
    {"ppc.draws", ConfigType::String, std::string(), "draws.csv from an earlier fit; empty fits first"},

    {"check_grad.sim", ConfigType::String, std::string("sim1_q2"), "design for the audit instance when no data is given"},
    {"check_grad.num_subjects", ConfigType::Integer, I{20}, "subjects in the audit instance"},
    {"check_grad.points", ConfigType::Integer, I{50}, "random unconstrained points"},
    {"check_grad.half_width", ConfigType::Real, 2.0, "points are uniform on [-half_width, half_width]"},
    {"check_grad.step", ConfigType::Real, 1e-5, "central-difference step"},
    {"check_grad.tolerance", ConfigType::Real, 1e-5, "largest accepted relative error"},
    {"check_grad.seed", ConfigType::Integer, I{1}, "seed for the instance and the points"},
};

const char* type_name(ConfigType t) {
  switch (t) {
    case ConfigType::Integer: return "integer";
    case ConfigType::Real: return "real";
    case ConfigType::Boolean: return "boolean";
    case ConfigType::String: return "string";
    case ConfigType::StringList: return "string list";
  }
  return "";
}

std::string render(const ConfigValue& v) {
  struct {
    std::string operator()(I x) const { return std::to_string(x); }
    std::string operator()(double x) const {
      std::ostringstream s;
      s << x;
      return s.str();
    }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const { return '"' + x + '"'; }
    std::string operator()(const Strings& x) const {
      std::string out = "[";
      for (std::size_t k = 0; k < x.size(); ++k) out += (k ? ", \"" : "\"") + x[k] + '"';
      return out + "]";
    }
  } visitor;
  return std::visit(visitor, v);
}

const ConfigKey* find_key(const std::string& path) {
  const auto it = std::find_if(kSchema.begin(), kSchema.end(), [&](const ConfigKey& k) { return k.path == path; });
  return it == kSchema.end() ? nullptr : &*it;
}

using Values = std::map<std::string, ConfigValue>;

ConfigValue from_node(const ConfigKey& key, const toml::node& node) {
  const auto bad = [&]() -> ConfigError {
    return ConfigError("'" + key.path + "' must be a " + type_name(key.type));
  };
  switch (key.type) {
    case ConfigType::Integer:
      if (const auto v = node.value_exact<I>()) return *v;
      throw bad();
    case ConfigType::Real:
      if (node.is_integer() || node.is_floating_point()) return *node.value<double>();
      throw bad();
    case ConfigType::Boolean:
      if (const auto v = node.value_exact<bool>()) return *v;
      throw bad();
    case ConfigType::String:
      if (const auto v = node.value_exact<std::string>()) return *v;
      throw bad();
    case ConfigType::StringList: {
      const auto* arr = node.as_array();
      if (!arr) throw bad();
      Strings out;
      for (const auto& e : *arr) {
        const auto v = e.value_exact<std::string>();
        if (!v) throw bad();
        out.push_back(*v);
      }
      return out;
    }
  }
  throw bad();
}

void collect(const toml::table& table, const std::string& prefix, Values& values) {
  for (const auto& [k, node] : table) {
    const std::string path = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = node.as_table()) {
      collect(*sub, path, values);
      continue;
    }
    const ConfigKey* key = find_key(path);
    if (!key) throw ConfigError("unknown key '" + path + "'");
    values[path] = from_node(*key, node);
  }
}

ConfigValue from_text(const ConfigKey& key, const std::string& text) {
  const auto bad = [&]() -> ConfigError {
    return ConfigError("'" + key.path + "' must be a " + type_name(key.type) + ", got '" + text + "'");
  };
  switch (key.type) {
    case ConfigType::Integer: {
      std::size_t used = 0;
      try {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return I{v};
      } catch (const std::exception&) {
      }
      throw bad();
    }
    case ConfigType::Real: {
      double v = 0.0;
      if (csv::parse_double(text, v)) return v;
      throw bad();
    }
    case ConfigType::Boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw bad();
    case ConfigType::String:
      return text;
    case ConfigType::StringList: {
      Strings out;
      if (!text.empty()) out = csv::split(text);
      return out;
    }
  }
  throw bad();
}

class Reader {
 public:
  explicit Reader(const Values& values) : values_(values) {}

  template <typename T>
  const T& get(const std::string& path) const {
    const auto it = values_.find(path);
    if (it != values_.end()) return std::get<T>(it->second);
    return std::get<T>(find_key(path)->default_value);
  }
  int integer(const std::string& path, I lo, I hi = std::numeric_limits<int>::max()) const {
    const I v = get<I>(path);
    if (v < lo || v > hi) throw ConfigError("'" + path + "' out of range: " + std::to_string(v));
    return static_cast<int>(v);
  }
  std::uint64_t seed(const std::string& path) const {
    const I v = get<I>(path);
    if (v < 0) throw ConfigError("'" + path + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  double real(const std::string& path) const { return get<double>(path); }
  bool boolean(const std::string& path) const { return get<bool>(path); }
  const std::string& string(const std::string& path) const { return get<std::string>(path); }
  const Strings& strings(const std::string& path) const { return get<Strings>(path); }

 private:
  const Values& values_;
};

std::string one_of(const std::string& path, const std::string& value, const Strings& allowed) {
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("'" + path + "' must be one of " + list + ", got '" + value + "'");
  }
  return value;
}

RunConfig build(const Values& values) {
  const Reader r(values);
  RunConfig c;
  c.schema_version = r.integer("schema_version", 1, 1);

  c.longitudinal = r.string("data.longitudinal");
  c.outcome = r.string("data.outcome");
  c.csv.subject_column = r.string("data.subject_column");
  c.csv.time_column = r.string("data.time_column");
  c.csv.marker_columns = r.strings("data.marker_columns");
  c.csv.covariate_columns = r.strings("data.covariate_columns");
  c.csv.outcome_column = r.string("data.outcome_column");
  c.detrend_span = r.real("data.detrend_span");
  if (c.detrend_span < 0.0 || c.detrend_span > 1.0) throw ConfigError("'data.detrend_span' must be in [0, 1]");

  c.features = r.strings("model.features");
  const std::string family = one_of("model.family", r.string("model.family"), {"gaussian", "mixture"});
  c.family = family == "gaussian" ? OutcomeFamily::Gaussian : OutcomeFamily::ScaleMixture2;
  c.parameterization =
      one_of("model.parameterization", r.string("model.parameterization"), {"noncentered", "centered"}) == "centered"
          ? Parameterization::Centered
          : Parameterization::NonCentered;
  c.include_outcome = r.boolean("model.include_outcome");
  auto& h = c.hyper;
  h.m = r.real("model.hyper.m");
  h.xi = r.real("model.hyper.xi");
  h.tau = r.real("model.hyper.tau");
  h.kappa = r.real("model.hyper.kappa");
  h.kappa_prime = r.real("model.hyper.kappa_prime");
  h.tau0 = r.real("model.hyper.tau0");
  h.zeta = r.real("model.hyper.zeta");
  h.tau1 = r.real("model.hyper.tau1");
  h.tau2 = r.real("model.hyper.tau2");
  h.coef_sd = r.real("model.hyper.coef_sd");
  h.validate();

  auto& s = c.sampler;
  s.chains = r.integer("sampler.chains", 1);
  s.iterations = r.integer("sampler.iterations", 1);
  s.warmup = r.integer("sampler.warmup", 0);
  s.target_accept = r.real("sampler.target_accept");
  s.max_tree_depth = r.integer("sampler.max_tree_depth", 1, 30);
  s.seed = r.seed("sampler.seed");
  s.init_jitter = r.real("sampler.init_jitter");
  c.init = one_of("sampler.init", r.string("sampler.init"), {"data", "random"});
  s.validate();

  c.output_dir = r.string("output.dir");
  c.write_draws = r.boolean("output.write_draws");
  c.workers = r.integer("run.workers", 1);
  c.baseline_method = one_of("baseline.method", r.string("baseline.method"), {"tslm", "tslmm", "tsiv"});

  auto& rep = c.replicate;
  rep.sim = r.string("replicate.sim");
  rep.methods = r.strings("replicate.methods");
  for (const auto& m : rep.methods) one_of("replicate.methods", m, {"jmiv", "tslm", "tslmm", "tsiv"});
  rep.replicates = r.integer("replicate.replicates", 1);
  rep.seed = r.seed("replicate.seed");
  rep.num_subjects = r.integer("replicate.num_subjects", 0);
  rep.truth_init_jitter = r.real("replicate.truth_init_jitter");
  rep.max_failure_fraction = r.real("replicate.max_failure_fraction");
  rep.oracle_size = static_cast<std::size_t>(r.integer("replicate.oracle_size", 0));

  c.simulate.sim = r.string("simulate.sim");
  c.simulate.num_subjects = r.integer("simulate.num_subjects", 0);
  c.simulate.seed = r.seed("simulate.seed");

  c.ppc.n_rep = r.integer("ppc.n_rep", 1);
  c.ppc.seed = r.seed("ppc.seed");
  c.ppc.draws = r.string("ppc.draws");

  auto& g = c.check_grad;
  g.sim = r.string("check_grad.sim");
  g.num_subjects = r.integer("check_grad.num_subjects", 2);
  g.points = r.integer("check_grad.points", 1);
  g.half_width = r.real("check_grad.half_width");
  g.step = r.real("check_grad.step");
  g.tolerance = r.real("check_grad.tolerance");
  g.seed = r.seed("check_grad.seed");
  if (!(g.half_width > 0.0) || !(g.step > 0.0) || !(g.tolerance > 0.0))
    throw ConfigError("check_grad half_width, step and tolerance must be positive");
  return c;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() { return kSchema; }

std::string config_help() {
  std::ostringstream out;
  out << "Configuration keys (TOML; dotted prefixes are tables):\n";
  for (const auto& k : kSchema)
    out << "  " << k.path << " (" << type_name(k.type) << ", default " << render(k.default_value) << ")\n      "
        << k.doc << '\n';
  return out.str();
}

ModelSpec RunConfig::model_spec(int q, int d) const {
  ModelSpec spec = ModelSpec::defaults(q, d);
  if (!features.empty()) {
    spec.features.clear();
    for (const auto& f : features) spec.features.push_back(Feature::parse(f));
  }
  spec.family = family;
  spec.parameterization = parameterization;
  spec.include_outcome = include_outcome;
  spec.hyper = hyper;
  spec.validate();
  return spec;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides, const std::string& source) {
  Values values;
  try {
    const toml::table table = toml::parse(text, source);
    collect(table, "", values);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ':' << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string path = o.substr(0, eq);
    const ConfigKey* key = find_key(path);
    if (!key) throw ConfigError("unknown key '" + path + "'");
    values[path] = from_text(*key, o.substr(eq + 1));
  }
  return build(values);
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  if (!path) return parse_config("", overrides);
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot read config file " + path->string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides, path->string());
}

}  // namespace varjm
