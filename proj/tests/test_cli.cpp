#include "varjm/cli.hpp"
#include "varjm/csv.hpp"
#include "varjm/sim.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace varjm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "varjm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("varjm_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path kSource = VARJM_SOURCE_DIR;
const std::string kTinyData = "--set=data.longitudinal=" + (kSource / "data/tiny/longitudinal.csv").string();
const std::string kTinyOutcome = "--set=data.outcome=" + (kSource / "data/tiny/outcome.csv").string();

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists every configuration key") {
  const Result top = cli({"--help"});
  CHECK(top.code == 0);
  const Result sub = cli({"fit", "--help"});
  CHECK(sub.code == 0);
  for (const auto& key : config_schema()) {
    CAPTURE(key.path);
    CHECK(top.out.find(key.path + " (") != std::string::npos);
    CHECK(sub.out.find(key.path + " (") != std::string::npos);
  }
  for (const char* cmd : {"fit", "replicate", "baseline", "ppc", "simulate", "check-grad"})
    CHECK(top.out.find(cmd) != std::string::npos);
}

TEST_CASE("configuration schema is enforced") {
  CHECK_THROWS_WITH_AS(parse_config("[sampler]\nchain = 2\n"), doctest::Contains("unknown key 'sampler.chain'"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[sampler]\nchains = \"two\"\n"), doctest::Contains("integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("schema_version = 2\n"), doctest::Contains("schema_version"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[model]\nfamily = \"poisson\"\n"), doctest::Contains("gaussian, mixture"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("[sampler\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("", {"sampler.warmup=5"}), SamplerError);
  CHECK_THROWS_AS(parse_config("", {"nope=1"}), ConfigError);

  const RunConfig c = parse_config(R"(
schema_version = 1
[model]
features = ["b11", "s11", "s11*s22"]
family = "mixture"
[model.hyper]
tau2 = 4
[sampler]
chains = 2
target_accept = 0.9
[replicate]
methods = ["tslm", "tsiv"]
)",
                                   {"sampler.chains=3", "replicate.methods=jmiv,tslm"});
  CHECK(c.sampler.chains == 3);
  CHECK(c.sampler.target_accept == 0.9);
  CHECK(c.hyper.tau2 == 4.0);
  CHECK(c.family == OutcomeFamily::ScaleMixture2);
  CHECK(c.replicate.methods == std::vector<std::string>{"jmiv", "tslm"});
  const ModelSpec spec = c.model_spec(2, 1);
  CHECK(spec.feature_names() == std::vector<std::string>{"b11", "s11", "s11*s22"});
}

TEST_CASE("simulate writes a loadable dataset deterministically") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  CHECK(cli({"simulate", "--set", "simulate.num_subjects=15", "-o", a.string()}).code == 0);
  CHECK(cli({"simulate", "--set", "simulate.num_subjects=15", "-o", b.string()}).code == 0);
  for (const char* f : {"longitudinal.csv", "outcome.csv", "latent.csv"}) CHECK(slurp(a / f) == slurp(b / f));
  const Dataset data = load_dataset(a / "longitudinal.csv", a / "outcome.csv");
  CHECK(data.size() == 15);
  CHECK(data.num_markers() == 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("fit on the bundled dataset") {
  const fs::path dir = scratch("fit");
  const fs::path config = kSource / "configs/tiny_fit.toml";
  const fs::path data = kSource / "data/tiny";
  const Result r = cli({"fit", "-c", config.string(), "-o", dir.string(), "--set",
                        "data.longitudinal=" + (data / "longitudinal.csv").string(), "--set",
                        "data.outcome=" + (data / "outcome.csv").string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "diagnostics.json"));
  CHECK_FALSE(fs::exists(dir / "draws.csv"));
  const auto summary = csv::read(dir / "summary.csv");
  CHECK(summary.header[0] == "parameter");
  CHECK(summary.rows.back()[0] == "sigma");
  CHECK(slurp(dir / "diagnostics.json").find("\"converged\": true") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("fit exit codes") {
  const fs::path dir = scratch("fit_short");
  const Result shortest = cli({"fit", kTinyData, kTinyOutcome, "-o", dir.string(), "--set", "sampler.chains=2",
                               "--set", "sampler.iterations=20", "--set", "sampler.warmup=10"});
  CHECK(shortest.code == 2);
  CHECK(shortest.err.find("R-hat") != std::string::npos);
  CHECK(slurp(dir / "diagnostics.json").find("\"converged\": false") != std::string::npos);

  const Result missing = cli({"fit", "--set", "data.longitudinal=/no/such/markers.csv", kTinyOutcome});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("/no/such/markers.csv") != std::string::npos);

  const Result no_data = cli({"fit"});
  CHECK(no_data.code == 1);
  CHECK(no_data.err.find("data.longitudinal") != std::string::npos);

  CHECK(cli({"fit", "--bogus"}).code == 1);
  CHECK(cli({}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("fit output does not depend on workers") {
  const fs::path a = scratch("w1"), b = scratch("w2");
  const std::vector<std::string> common{kTinyData, kTinyOutcome, "--set", "sampler.chains=2", "--set",
                                        "sampler.iterations=120", "--set", "sampler.warmup=60", "--set",
                                        "output.write_draws=true"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.begin(), {"fit", "-o", a.string(), "--workers", "1"});
  args_b.insert(args_b.begin(), {"fit", "-o", b.string(), "--workers", "2"});
  cli(args_a);
  cli(args_b);
  for (const char* f : {"summary.csv", "draws.csv", "diagnostics.json"}) {
    CAPTURE(f);
    CHECK(!slurp(a / f).empty());
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("ppc from stored draws") {
  const fs::path fit = scratch("ppc_fit"), out = scratch("ppc_out");
  cli({"fit", kTinyData, kTinyOutcome, "-o", fit.string(), "--set", "sampler.chains=2", "--set",
       "sampler.iterations=200", "--set", "sampler.warmup=100", "--set", "output.write_draws=true"});
  const Result r = cli({"ppc", kTinyData, kTinyOutcome, "-o", out.string(), "--set",
                        "ppc.draws=" + (fit / "draws.csv").string(), "--set", "ppc.n_rep=50"});
  CHECK(r.code == 0);
  const auto p = csv::read(out / "ppc_pvalues.csv");
  CHECK(p.rows.size() == 40);
  CHECK(csv::read(out / "ppc_outcome.csv").rows.size() == 50 * 20);

  const Result too_many = cli({"ppc", kTinyData, kTinyOutcome, "-o", out.string(), "--set",
                               "ppc.draws=" + (fit / "draws.csv").string(), "--set", "ppc.n_rep=1000"});
  CHECK(too_many.code == 1);
  CHECK(too_many.err.find("draws") != std::string::npos);

  const Result mismatch = cli({"ppc", kTinyData, kTinyOutcome, "-o", out.string(), "--set",
                               "ppc.draws=" + (fit / "draws.csv").string(), "--set", "model.include_outcome=false"});
  CHECK(mismatch.code == 1);
  CHECK(cli({"ppc", kTinyData, kTinyOutcome, "--set", "ppc.draws=/no/draws.csv"}).code == 1);
  fs::remove_all(fit);
  fs::remove_all(out);
}

TEST_CASE("baseline command") {
  const fs::path dir = scratch("baseline");
  const Result r = cli({"baseline", kTinyData, kTinyOutcome, "-o", dir.string()});
  CHECK(r.code == 0);
  const auto t = csv::read(dir / "baseline_tslm.csv");
  CHECK(t.rows.size() == 7);
  CHECK(cli({"baseline", kTinyData, kTinyOutcome, "--set", "baseline.method=ols"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("replicate command writes reports and resumes") {
  const fs::path dir = scratch("replicate");
  const auto start = std::chrono::steady_clock::now();
  const Result r = cli({"replicate", "-o", dir.string(), "--set", "replicate.methods=tslm", "--set",
                        "replicate.replicates=2", "--set", "replicate.num_subjects=200"});
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 10.0);
  CHECK(r.code == 0);
  CHECK(csv::read(dir / "replication_report.csv").rows.size() == 7);
  CHECK(r.out.find("| alpha11 = -3 | TSLM |") != std::string::npos);
  CHECK(fs::exists(dir / "replication_report.md"));

  CHECK(cli({"replicate", "-o", dir.string(), "--set", "replicate.methods=tslm", "--set",
             "replicate.replicates=3", "--set", "replicate.num_subjects=200"})
            .code == 0);
  const auto recs = read_replicates_csv(dir / "replicates.csv");
  CHECK(recs.size() == 21);
  for (int rep = 0; rep < 3; ++rep)
    CHECK(std::count_if(recs.begin(), recs.end(), [&](const ReplicateRecord& x) { return x.replicate == rep; }) == 7);

  const Result changed = cli({"replicate", "-o", dir.string(), "--set", "replicate.methods=tslm", "--set",
                              "replicate.replicates=3", "--set", "replicate.num_subjects=150"});
  CHECK(changed.code == 1);
  fs::remove_all(dir);
}

TEST_CASE("replicate on the nonlinear design reports its targets") {
  const fs::path dir = scratch("replicate3");
  const Result r = cli({"replicate", "-o", dir.string(), "--set", "replicate.sim=sim3_nonlinear", "--set",
                        "replicate.methods=tslm", "--set", "replicate.replicates=1", "--set",
                        "replicate.num_subjects=100"});
  CHECK(r.code == 0);
  const auto targets = csv::read(dir / "targets.csv");
  REQUIRE(targets.rows.size() == 7);
  const Vector limit = sim3_limit_coefficients(SimTruth::sim3());
  double v = 0.0;
  REQUIRE(csv::parse_double(targets.rows[0][1], v));
  CHECK(targets.rows[0][0] == "alpha11");
  CHECK(v == doctest::Approx(limit[0]));
  CHECK(r.out.find("| gamma11 = 6.9") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("check-grad audit") {
  const Result r = cli({"check-grad"});
  CHECK(r.code == 0);
  CHECK(r.out.find("50 points") != std::string::npos);
  const Result strict = cli({"check-grad", "--set", "check_grad.tolerance=1e-30"});
  CHECK(strict.code == 2);
}

}  // TEST_SUITE
