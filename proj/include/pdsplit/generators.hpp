#pragma once

#include "pdsplit/solvers.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pdsplit {

enum class ExperimentKind {
  L1Inverse,
  L12Inverse,
  LInfInverse,
  NuclearInverse,
  TvSparseNoise,
  TvUniformNoise,
  TvGroupRegression,
  SweepGamma,
  SweepTheta,
  SweepGammaSplit,
  Oscillation,
};

std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view name);
bool is_sweep(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::L1Inverse;
  std::uint64_t seed = 0;
  std::optional<Index> m;
  std::optional<Index> n;
  std::optional<Index> sparsity;
  std::optional<double> theta;
  std::optional<double> gamma_r;
  std::optional<double> gamma_j;
  /// gamma_J gamma_R ||L||^2 with gamma_J = gamma_R; ignored when either
  /// step is given explicitly.
  std::optional<double> product;
  std::optional<int> max_iter;
  std::optional<double> mu1;
  std::optional<double> mu2;
  /// tv_group_regression only: put the data term in a second dual block.
  bool multi_block = false;
  /// Problem used by the sweeps and the oscillation run.
  ExperimentKind base = ExperimentKind::L1Inverse;
  int reference_factor = 10;
  std::filesystem::path out_dir = ".";
};

struct GeneratedProblem {
  PDProblem problem;
  Vector x_ob;
  Index m = 0;
  Index n = 0;
  int max_iter = 1000;
  /// Relative rate tolerance of the pass verdict.
  double rate_tolerance = 0.05;
  std::vector<std::string> notes;
};

/// Seeded instance with default steps (theta = 1, gamma_R = gamma_J,
/// gamma_J gamma_R ||L||^2 = 0.99) unless the config overrides them.
GeneratedProblem generate_problem(const ExperimentConfig& cfg);

/// Reassigns gamma_R and gamma_J of a single-block problem from the config
/// overrides, falling back to the default product 0.99.
void apply_step_overrides(PDProblem& p, const ExperimentConfig& cfg);

}  // namespace pdsplit
