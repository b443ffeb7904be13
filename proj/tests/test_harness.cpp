#include "pdsplit/experiment.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace pdsplit;

namespace {

Index nonzeros(const Vector& v) { return (v.array() != 0.0).count(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("pdsplit_test_harness_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("generator defaults") {
  ExperimentConfig cfg;
  const auto g = generate_problem(cfg);
  CHECK(g.n == 128);
  CHECK(g.m == 48);
  CHECK(nonzeros(g.x_ob) == 8);
  REQUIRE(g.problem.blocks.size() == 1);
  CHECK(g.problem.blocks[0].L.out_dim() == 48);
  CHECK(g.problem.blocks[0].J.kind == FunctionKind::IndicatorPoint);
  // Noiseless data: the observation is K x_ob.
  CHECK((g.problem.blocks[0].L.apply(g.x_ob) - g.problem.blocks[0].J.center).norm() <= 1e-12);
  const auto s = check_step_rule(g.problem);
  CHECK(s.coupling == doctest::Approx(0.99).epsilon(1e-9));
  CHECK(g.problem.theta == 1.0);

  cfg.experiment = ExperimentKind::TvSparseNoise;
  const auto t = generate_problem(cfg);
  CHECK(t.n == 128);
  CHECK(t.problem.R.kind == FunctionKind::IndicatorL1Ball);
  const Vector w = t.problem.R.center - t.x_ob;
  CHECK(nonzeros(w) == 16);
  CHECK(t.problem.R.radius == doctest::Approx(1.05 * w.lpNorm<1>()).epsilon(1e-14));
  CHECK(t.problem.blocks[0].L.is_finite_difference());
}

TEST_CASE("a fixed seed regenerates the same problem") {
  for (auto k : {ExperimentKind::L1Inverse, ExperimentKind::TvUniformNoise, ExperimentKind::L12Inverse}) {
    ExperimentConfig cfg;
    cfg.experiment = k;
    cfg.seed = 7;
    CHECK(to_json(generate_problem(cfg).problem).dump() == to_json(generate_problem(cfg).problem).dump());
    ExperimentConfig other = cfg;
    other.seed = 8;
    CHECK(to_json(generate_problem(cfg).problem).dump() != to_json(generate_problem(other).problem).dump());
  }
}

TEST_CASE("infeasible overrides are rejected") {
  ExperimentConfig cfg;
  cfg.product = -1.0;
  REQUIRE_THROWS_AS(generate_problem(cfg), InvalidInput);
  cfg = {};
  cfg.gamma_r = -0.5;
  REQUIRE_THROWS_AS(generate_problem(cfg), InvalidInput);
  cfg = {};
  cfg.experiment = ExperimentKind::Oscillation;
  cfg.base = ExperimentKind::SweepGamma;
  REQUIRE_THROWS_AS(generate_problem(cfg), InvalidInput);
  cfg = {};
  cfg.experiment = ExperimentKind::SweepTheta;
  REQUIRE_THROWS_AS(run_experiment(cfg, false), InvalidInput);
  REQUIRE_THROWS_AS(experiment_kind_from_string("l2_inverse"), InvalidInput);
}

TEST_CASE("fit_observed_rate") {
  std::vector<double> e;
  for (int k = 0; k < 400; ++k) e.push_back(3.0 * std::pow(0.9, k));
  auto f = fit_observed_rate(e, 10);
  REQUIRE(f.rho);
  CHECK(*f.rho == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(f.first == 10);
  // The window ends at the last error above the floor.
  const int last = static_cast<int>(std::floor(std::log(1e-12 / 3.0) / std::log(0.9)));
  CHECK(f.last == last);
  CHECK(f.points == last - 10 + 1);
  CHECK_FALSE(fit_observed_rate(e, last - 10).rho);
  CHECK_FALSE(fit_observed_rate(std::vector<double>(10, 1.0), 0).rho);
}

TEST_CASE("detect_period") {
  std::vector<double> e;
  for (int k = 0; k < 400; ++k) e.push_back(std::pow(0.97, k) * (std::abs(std::cos(std::numbers::pi * k / 12.0)) + 1e-3));
  const auto per = detect_period(e, 0);
  REQUIRE(per);
  CHECK(*per == doctest::Approx(12.0));
  std::vector<double> mono;
  for (int k = 0; k < 400; ++k) mono.push_back(std::pow(0.97, k));
  CHECK_FALSE(detect_period(mono, 0));
}

TEST_CASE("tune_c_for_period") {
  // At theta = 1 the target solves sqrt(1 - c) = cos(pi/12).
  const double s = std::sin(std::numbers::pi / 12);
  CHECK(std::abs(tune_c_for_period(1.0, 12.0) - s * s) <= 1e-12);
  for (double theta : {0.5, 0.8, 1.0})
    for (double period : {4.0, 12.0, 30.0}) {
      const double c = tune_c_for_period(theta, period);
      const auto got = oscillation_period(theta, 1.0, 1.0, std::sqrt(c));
      REQUIRE(got);
      CHECK(*got == doctest::Approx(period).epsilon(1e-9));
    }
  REQUIRE_THROWS_AS(tune_c_for_period(1.0, 2.0), InvalidInput);
}

TEST_CASE("l1 inverse problem end to end") {
  ExperimentConfig cfg;
  cfg.out_dir = scratch("l1");
  const auto r = run_experiment(cfg);
  CHECK(r.verdict == Verdict::Pass);
  REQUIRE(r.relative_error);
  CHECK(*r.relative_error <= 0.05);
  REQUIRE(r.nd);
  CHECK(r.nd->holds);
  REQUIRE(r.identification.K);
  REQUIRE(r.err_K);
  CHECK(*r.err_K == r.errors[static_cast<std::size_t>(*r.identification.K)]);
  REQUIRE(r.prediction);
  CHECK(r.prediction->rho < 1.0);

  const Json j = Json::parse(slurp(cfg.out_dir / "report.json"));
  for (const char* key : {"config", "step_rule", "nd", "prediction", "observed", "anchor", "verdict"})
    CHECK(j.contains(key));
  CHECK(j["anchor"]["K"] == *r.identification.K);
  CHECK(j["anchor"]["err_K"].get<double>() == *r.err_K);
  CHECK(j["anchor"]["rho"].get<double>() == r.prediction->rho);
  CHECK(j["verdict"] == "pass");

  const std::string csv = slurp(cfg.out_dir / "profile.csv");
  CHECK(csv.rfind("k,err,identified\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.errors.size() + 1);

  // Byte-identical outputs on a re-run.
  ExperimentConfig again = cfg;
  again.out_dir = scratch("l1_again");
  run_experiment(again);
  CHECK(slurp(cfg.out_dir / "profile.csv") == slurp(again.out_dir / "profile.csv"));
}

TEST_CASE("a budget too short to identify is inconclusive") {
  ExperimentConfig cfg;
  cfg.max_iter = 15;
  const auto r = run_experiment(cfg, false);
  CHECK(r.verdict == Verdict::Inconclusive);
  CHECK_FALSE(r.verdict_reason.empty());
}

TEST_CASE("sweeps") {
  ExperimentConfig cfg;
  for (auto k : {ExperimentKind::SweepGamma, ExperimentKind::SweepTheta, ExperimentKind::SweepGammaSplit}) {
    cfg.experiment = k;
    const auto s = run_sweep(cfg, false);
    REQUIRE(s.rows.size() == 4);
    CHECK(s.monotone);
    for (const auto& row : s.rows) {
      CHECK(row.error.empty());
      REQUIRE(row.predicted);
    }
    if (k == ExperimentKind::SweepGammaSplit) {
      for (const auto& row : s.rows)
        CHECK(std::abs(*row.predicted - *s.rows[0].predicted) <= 1e-9 * *s.rows[0].predicted);
    } else {
      for (std::size_t i = 1; i < s.rows.size(); ++i) {
        CHECK(s.rows[i].value > s.rows[i - 1].value);
        CHECK(*s.rows[i].predicted < *s.rows[i - 1].predicted);
      }
    }
  }
}
