#include "pdsplit/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace pdsplit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitFail = 2;

struct CommonOptions {
  std::uint64_t seed = 0;
  std::optional<double> theta, gamma_r, gamma_j, product, mu1, mu2;
  std::optional<int> max_iter;
  std::optional<Index> m, n, sparsity;
  std::string out = ".";
  std::string base = "l1_inverse";
  bool multi_block = false;
  int reference_factor = 10;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--theta", o.theta, "extrapolation parameter");
  cmd->add_option("--gamma-r", o.gamma_r, "primal step");
  cmd->add_option("--gamma-j", o.gamma_j, "dual step");
  cmd->add_option("--product", o.product, "gamma_J gamma_R ||L||^2 with equal steps");
  cmd->add_option("--max-iter", o.max_iter, "iteration budget");
  cmd->add_option("--m", o.m, "rows of the measurement operator");
  cmd->add_option("--n", o.n, "signal dimension");
  cmd->add_option("--sparsity", o.sparsity, "nonzeros of the ground truth");
  cmd->add_option("--mu1", o.mu1, "group weight (tv_group_regression)");
  cmd->add_option("--mu2", o.mu2, "TV weight (tv_group_regression)");
  cmd->add_flag("--multi-block", o.multi_block, "data term as a second dual block");
  cmd->add_option("--base", o.base, "base problem of sweeps and oscillation");
  cmd->add_option("--reference-factor", o.reference_factor, "reference budget multiplier")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig make_config(const std::string& tag, const CommonOptions& o) {
  ExperimentConfig c;
  c.experiment = experiment_kind_from_string(tag);
  c.seed = o.seed;
  c.theta = o.theta;
  c.gamma_r = o.gamma_r;
  c.gamma_j = o.gamma_j;
  c.product = o.product;
  c.max_iter = o.max_iter;
  c.m = o.m;
  c.n = o.n;
  c.sparsity = o.sparsity;
  c.mu1 = o.mu1;
  c.mu2 = o.mu2;
  c.multi_block = o.multi_block;
  c.base = experiment_kind_from_string(o.base);
  c.reference_factor = o.reference_factor;
  c.out_dir = o.out;
  return c;
}

int cmd_run(const std::string& tag, const CommonOptions& o) {
  const auto cfg = make_config(tag, o);
  const auto r = run_experiment(cfg);
  std::cout << to_string(cfg.experiment) << ": " << to_string(r.verdict) << " (" << r.verdict_reason << ")\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return r.verdict == Verdict::Fail ? kExitFail : kExitOk;
}

int cmd_sweep(const std::string& tag, const CommonOptions& o) {
  const auto cfg = make_config(tag, o);
  const auto s = run_sweep(cfg);
  bool failed = !s.monotone;
  for (const auto& row : s.rows) {
    std::cout << row.param << '=' << row.value << ": ";
    if (!row.error.empty()) {
      std::cout << "error: " << row.error << '\n';
      continue;
    }
    std::cout << "predicted " << (row.predicted ? std::to_string(*row.predicted) : "-") << ", observed "
              << (row.observed ? std::to_string(*row.observed) : "-") << ", " << to_string(row.verdict) << '\n';
    failed = failed || row.verdict == Verdict::Fail;
  }
  std::cout << "monotone: " << (s.monotone ? "yes" : "no") << '\n';
  return failed ? kExitFail : kExitOk;
}

int cmd_rate(const std::string& problem_path, const std::string& solution_path) {
  const auto p = problem_from_json(read_json_file(problem_path));
  const auto z = solution_from_json(read_json_file(solution_path));
  const auto pred = predict_rate(p, z);
  Json eig = Json::array();
  for (const auto& e : pred.eigenvalues) eig.push_back({e.real(), e.imag()});
  Json out = {{"rho", pred.rho},
              {"backend", std::string(to_string(pred.backend))},
              {"sigma_max", pred.sigma_max},
              {"rank", pred.rank},
              {"eigenvalues", eig}};
  if (pred.closed_form_rho) out["closed_form_rho"] = *pred.closed_form_rho;
  if (pred.sigma_min) out["sigma_min"] = *pred.sigma_min;
  if (pred.period) out["period"] = *pred.period;
  if (pred.theta_max) out["theta_max"] = *pred.theta_max;
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_check_step(const std::string& problem_path) {
  const auto p = problem_from_json(read_json_file(problem_path));
  const auto s = check_step_rule(p);
  Json out = {{"lhs", s.lhs},
              {"satisfied", s.satisfied},
              {"coupling", s.coupling},
              {"operator_norms", s.operator_norms},
              {"degenerate", s.degenerate}};
  std::cout << out.dump(2) << '\n';
  return s.satisfied ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual splitting: local rate prediction and experiments"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts;
  std::string run_tag, sweep_tag, problem_path, solution_path, step_problem;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("experiment", run_tag, "experiment tag")->required();
  add_common(run, run_opts);

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  sweep->add_option("kind", sweep_tag, "sweep_gamma | sweep_theta | sweep_gamma_split")->required();
  add_common(sweep, sweep_opts);

  auto* rate = app.add_subcommand("rate", "predict the local rate at a given solution");
  rate->add_option("--problem", problem_path, "problem JSON")->required()->check(CLI::ExistingFile);
  rate->add_option("--solution", solution_path, "solution JSON")->required()->check(CLI::ExistingFile);

  auto* step = app.add_subcommand("check-step", "evaluate the step-size rule");
  step->add_option("--problem", step_problem, "problem JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInternal;
  }

  try {
    if (*run) return cmd_run(run_tag, run_opts);
    if (*sweep) return cmd_sweep(sweep_tag, sweep_opts);
    if (*rate) return cmd_rate(problem_path, solution_path);
    return cmd_check_step(step_problem);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}
