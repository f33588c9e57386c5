#include "varjm/csv.hpp"
#include "varjm/data.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace varjm;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("varjm_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

// Direct tricube-weighted least squares at every point, written without
// any of the windowing used by the library.
std::vector<double> lowess_oracle(const std::vector<double>& x, const std::vector<double>& y, double span) {
  const std::size_t n = x.size();
  const auto q = static_cast<std::size_t>(std::floor(span * static_cast<double>(n) + 1e-7));
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j) dist[j] = std::abs(x[j] - x[i]);
    auto sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    const double h = sorted[q - 1];
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = dist[j] / h;
      const double w = u < 1 ? std::pow(1 - u * u * u, 3) : 0.0;
      s0 += w;
      s1 += w * x[j];
      s2 += w * x[j] * x[j];
      t0 += w * y[j];
      t1 += w * x[j] * y[j];
    }
    const double det = s0 * s2 - s1 * s1;
    const double a = (s2 * t0 - s1 * t1) / det;
    const double b = (s0 * t1 - s1 * t0) / det;
    resid[i] = y[i] - (a + b * x[i]);
  }
  return resid;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("well-formed pair loads") {
  TempDir dir;
  const auto lf = dir.write("long.csv", "subject_id,time,m1,m2\n2,1,0.5,1.5\n1,0,1,2\n1,1,1.5,2.5\n2,0,0.1,0.2\n");
  const auto of = dir.write("out.csv", "subject_id,w1,y\n1,0.3,10\n2,0.4,11\n");
  const auto data = load_dataset(lf, of);
  REQUIRE(data.size() == 2);
  CHECK(data.num_markers() == 2);
  CHECK(data.num_covariates() == 1);
  CHECK(data[0].id == "1");
  CHECK(data[1].times == std::vector<double>{0.0, 1.0});
  CHECK(data[1].markers(0, 1) == 0.2);
  CHECK(data[1].outcome == 11.0);
  CHECK(data.total_observations() == 4);
}

TEST_CASE("ids sort numerically") {
  TempDir dir;
  const auto lf = dir.write("long.csv", "subject_id,time,m1\n10,0,1\n10,1,2\n9,0,1\n9,1,2\n");
  const auto of = dir.write("out.csv", "subject_id,y\n10,1\n9,2\n");
  const auto data = load_dataset(lf, of);
  CHECK(data[0].id == "9");
  CHECK(data[1].id == "10");
}

TEST_CASE("load errors name the problem") {
  TempDir dir;
  const auto of = dir.write("out.csv", "subject_id,y\n1,1\n2,2\n");
  const auto single = dir.write("single.csv", "subject_id,time,m1\n1,0,1\n1,1,2\n2,0,1\n");
  CHECK(error_of([&] { load_dataset(single, of); }).find("fewer than 2 observations") != std::string::npos);

  const auto na = dir.write("na.csv", "subject_id,time,m1\n1,0,1\n1,1,NA\n2,0,1\n2,1,1\n");
  const auto msg = error_of([&] { load_dataset(na, of); });
  CHECK(msg.find("row 3") != std::string::npos);
  CHECK(msg.find("NA") != std::string::npos);

  const auto orphan = dir.write("orphan.csv", "subject_id,time,m1\n1,0,1\n1,1,2\n3,0,1\n3,1,1\n");
  CHECK(error_of([&] { load_dataset(orphan, of); }).find("absent from the outcome table") != std::string::npos);

  const auto nocol = dir.write("nocol.csv", "subject_id,tim,m1\n1,0,1\n");
  CHECK(error_of([&] { load_dataset(nocol, of); }).find("missing column 'time'") != std::string::npos);

  CHECK(error_of([&] { load_dataset(dir.path / "nope.csv", of); }).find("nope.csv") != std::string::npos);

  const auto dup = dir.write("dup.csv", "subject_id,time,m1\n1,0,1\n1,0,2\n2,0,1\n2,1,1\n");
  CHECK(error_of([&] { load_dataset(dup, of); }).find("duplicate observation time") != std::string::npos);
}

TEST_CASE("save then load is bit exact") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < 5; ++i) {
    SubjectRecord s;
    s.id = std::to_string(i + 1);
    s.markers.resize(4, 3);
    for (int j = 0; j < 4; ++j) {
      s.times.push_back(j * 0.7 + normal(rng) * 1e-3);
      for (int k = 0; k < 3; ++k) s.markers(j, k) = normal(rng) * 1e5;
    }
    std::sort(s.times.begin(), s.times.end());
    s.covariates = Vector::Random(2);
    s.outcome = normal(rng) / 3.0;
    subjects.push_back(s);
  }
  const Dataset data(subjects, 3, 2);
  TempDir dir;
  save_dataset(data, dir.path / "l.csv", dir.path / "o.csv");
  const auto back = load_dataset(dir.path / "l.csv", dir.path / "o.csv");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(back[i].times == data[i].times);
    CHECK(back[i].markers == data[i].markers);
    CHECK(back[i].covariates == data[i].covariates);
    CHECK(back[i].outcome == data[i].outcome);
  }
}

TEST_CASE("dataset invariants") {
  SubjectRecord s;
  s.id = "a";
  s.times = {0.0, 1.0};
  s.markers = Matrix::Zero(2, 1);
  s.covariates = Vector(0);
  CHECK_THROWS_AS(Dataset({s}, 1, 0), DataError);
  auto t = s;
  t.times = {1.0, 0.0};
  CHECK_THROWS_AS(Dataset({s, t}, 1, 0), DataError);
  CHECK_NOTHROW(Dataset({s, s}, 1, 0));
  CHECK_THROWS_AS(Dataset({s, s}, 2, 0), DataError);
}

TEST_CASE("lowess reproduces lines and constants") {
  std::vector<double> t, line, constant;
  for (int i = 0; i < 40; ++i) {
    t.push_back(i * 0.37);
    line.push_back(2.0 * t.back());
    constant.push_back(5.0);
  }
  for (double span : {0.2, 0.5, 2.0 / 3.0, 1.0}) {
    for (double r : lowess_detrend(t, line, span).residuals) CHECK(std::abs(r) < 1e-10);
    for (double r : lowess_detrend(t, constant, span).residuals) CHECK(std::abs(r) < 1e-10);
  }
}

TEST_CASE("lowess matches a direct weighted least squares oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  std::normal_distribution<double> normal(0.0, 0.3);
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    // Rounded times give many ties, as pooled visit schedules do.
    x.push_back(std::round(unif(rng) * 4.0) / 4.0);
    y.push_back(std::sin(x.back()) + 0.3 * x.back() + normal(rng));
  }
  const auto fit = lowess_detrend(x, y, 0.3);
  const auto oracle = lowess_oracle(x, y, 0.3);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(fit.residuals[i] - oracle[i]) < 1e-8);
  CHECK(fit.trend(x[0]) == doctest::Approx(y[0] - fit.residuals[0]).epsilon(1e-12));
}

TEST_CASE("lowess residual mean is near zero for symmetric noise") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x, y;
  for (int i = 0; i < 2000; ++i) {
    x.push_back(i * 0.01);
    y.push_back(std::cos(x.back()) + normal(rng));
  }
  const auto fit = lowess_detrend(x, y);
  double mean = 0.0;
  for (double r : fit.residuals) mean += r;
  mean /= static_cast<double>(x.size());
  CHECK(std::abs(mean) < 3.0 / std::sqrt(2000.0));
}

TEST_CASE("lowess input errors") {
  std::vector<double> few(5, 1.0);
  CHECK_THROWS_AS(lowess_detrend(few, few), DataError);
  std::vector<double> same(20, 3.0), vals(20);
  for (int i = 0; i < 20; ++i) vals[static_cast<std::size_t>(i)] = i;
  const auto msg = error_of([&] { lowess_detrend(same, vals); });
  CHECK(msg.find("t=3") != std::string::npos);
  std::vector<double> t(20);
  for (int i = 0; i < 20; ++i) t[static_cast<std::size_t>(i)] = i;
  CHECK_THROWS_AS(lowess_detrend(t, vals, 0.1), DataError);
}

TEST_CASE("detrending removes a shared trend") {
  std::vector<SubjectRecord> subjects;
  for (int i = 0; i < 10; ++i) {
    SubjectRecord s;
    s.id = std::to_string(i);
    s.markers.resize(5, 1);
    for (int j = 0; j < 5; ++j) {
      s.times.push_back(j + 0.1 * i);
      s.markers(j, 0) = 3.0 - 0.5 * s.times.back();
    }
    s.covariates = Vector(0);
    subjects.push_back(s);
  }
  const auto out = detrend_markers(Dataset(subjects, 1, 0), 2.0 / 3.0);
  for (const auto& s : out.subjects()) CHECK(s.markers.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rate outcome") {
  CHECK(compute_rate_outcome({0, 0.30}, {10, 0.34}) == doctest::Approx(0.004).epsilon(1e-12));
  CHECK(compute_rate_outcome({0, 1.7}, {4, 1.7}) == 0.0);
  CHECK_THROWS_AS(compute_rate_outcome({2, 0.5}, {2, 0.6}), DataError);
}

TEST_CASE("csv helpers") {
  const auto f = csv::split(" a , b,c\r");
  CHECK(f == std::vector<std::string>{"a", "b", "c"});
  double v = 0;
  CHECK(csv::parse_double("1e-3", v));
  CHECK(v == 1e-3);
  CHECK_FALSE(csv::parse_double("NA", v));
  CHECK_FALSE(csv::parse_double("1.5x", v));
  CHECK(csv::format_double(0.1) == "0.10000000000000001");
}

}  // TEST_SUITE
