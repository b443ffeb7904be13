#pragma once

#include "pdsplit/generators.hpp"
#include "pdsplit/identify.hpp"
#include "pdsplit/problem_io.hpp"
#include "pdsplit/ratepred.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pdsplit {

inline constexpr int kBurnIn = 10;
inline constexpr double kErrFloor = 1e-12;
inline constexpr int kMinFitWindow = 20;
inline constexpr double kNdTolerance = 1e-8;
inline constexpr double kReferenceStepTolerance = 1e-14;

struct RateFit {
  std::optional<double> rho;
  int first = 0;
  int last = -1;
  int points = 0;
};

/// Least-squares slope of log10 err over k in [start, last k with
/// err > err_floor]; rho = 10^slope. Empty with fewer than min_points samples.
RateFit fit_observed_rate(const std::vector<double>& errors, int start, double err_floor = kErrFloor,
                          int min_points = kMinFitWindow);

/// Median spacing of the local maxima of the detrended log10 errors after K.
/// Empty with fewer than 3 maxima.
std::optional<double> detect_period(const std::vector<double>& errors, int K, double err_floor = kErrFloor);

/// c in (0, 1) with oscillation period pi/omega equal to `period` for the
/// given theta, found by bisection on the eigenvalue argument.
double tune_c_for_period(double theta, double period);

enum class Verdict { Pass, Fail, Inconclusive };
std::string_view to_string(Verdict v);

struct ExperimentReport {
  ExperimentConfig config;
  PDProblem problem;
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
  StepRuleReport step_rule;

  PrimalDualPoint reference;
  int reference_iterations = 0;
  std::string reference_stop;
  double reference_residual = 0.0;

  std::vector<double> errors;
  std::vector<std::vector<ManifoldLabel>> trace;
  IdentificationReport identification;
  std::optional<NdReport> nd;
  std::string nd_error;

  std::optional<RatePrediction> prediction;
  std::string prediction_error;
  RateFit fit;
  std::optional<double> err_K;

  std::optional<double> period_predicted;
  std::optional<double> period_observed;
  /// Oscillation run: |omega(formula) - |arg(leading eigenvalue)||.
  std::optional<double> omega_mismatch;

  double rate_tolerance = 0.05;
  std::optional<double> relative_error;
  Verdict verdict = Verdict::Inconclusive;
  std::string verdict_reason;
  std::vector<std::filesystem::path> outputs;
};

/// Full pipeline for one generated problem: reference solve at
/// reference_factor x budget, recorded solve, identification, (ND), rate
/// prediction, slope fit, verdict. Writes nothing.
ExperimentReport run_problem(const GeneratedProblem& g, const ExperimentConfig& cfg);

/// Generates the configured experiment, runs it, and when write_outputs is set
/// emits profile.csv and report.json into cfg.out_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

Json report_to_json(const ExperimentReport& r);
void write_profile_csv(std::ostream& out, const ExperimentReport& r);

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::optional<int> K;
  std::optional<double> predicted;
  std::optional<double> observed;
  Verdict verdict = Verdict::Inconclusive;
  std::string error;
  std::string profile;
};

struct SweepResult {
  ExperimentKind kind = ExperimentKind::SweepGamma;
  std::vector<SweepRow> rows;
  /// gamma / theta sweeps: predicted rho strictly decreasing in the swept
  /// value. Split sweep: predicted rho equal across rows to 1e-9 relative.
  bool monotone = false;
};

/// Runs every setting of the sweep on the same seeded base problem. Emits
/// sweep.csv (and one profile_<i>.csv per row) when write_outputs is set.
SweepResult run_sweep(const ExperimentConfig& cfg, bool write_outputs = true);

}  // namespace pdsplit
