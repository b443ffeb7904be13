#include "pdsplit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace pdsplit {

namespace {

PrimalDualPoint zero_start(const PDProblem& p) {
  PrimalDualPoint z;
  z.x = Vector::Zero(p.primal_dim());
  for (const auto& b : p.blocks) z.v.push_back(Vector::Zero(b.L.out_dim()));
  return z;
}

RunHistory reference_solve(const PDProblem& p, int budget, int factor) {
  StoppingRule stop;
  stop.max_iter = budget * factor;
  stop.step_tol = kReferenceStepTolerance;
  stop.record_iterates = false;
  return pd_solve(p, zero_start(p), stop);
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json optional_json(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

Json labels_json(const std::vector<ManifoldLabel>& labels) {
  Json out = Json::array();
  for (const auto& l : labels) out.push_back(l.to_string());
  return out;
}

Json config_json(const ExperimentConfig& c) {
  Json j = {{"experiment", std::string(to_string(c.experiment))},
            {"seed", c.seed},
            {"multi_block", c.multi_block},
            {"base", std::string(to_string(c.base))},
            {"reference_factor", c.reference_factor}};
  if (c.m) j["m"] = *c.m;
  if (c.n) j["n"] = *c.n;
  if (c.sparsity) j["sparsity"] = *c.sparsity;
  if (c.theta) j["theta"] = *c.theta;
  if (c.gamma_r) j["gamma_r"] = *c.gamma_r;
  if (c.gamma_j) j["gamma_j"] = *c.gamma_j;
  if (c.product) j["product"] = *c.product;
  if (c.max_iter) j["max_iter"] = *c.max_iter;
  if (c.mu1) j["mu1"] = *c.mu1;
  if (c.mu2) j["mu2"] = *c.mu2;
  return j;
}

Json nd_json(const ExperimentReport& r) {
  if (!r.nd) return {{"holds", false}, {"error", r.nd_error}};
  Json dual = Json::array();
  for (const auto& d : r.nd->dual) dual.push_back({{"holds", d.holds}, {"margin", d.margin}});
  return {{"holds", r.nd->holds},
          {"tolerance", kNdTolerance},
          {"residual", r.nd->residual},
          {"primal", {{"holds", r.nd->primal.holds}, {"margin", r.nd->primal.margin}}},
          {"dual", dual}};
}

Json prediction_json(const RatePrediction& p) {
  Json eig = Json::array();
  for (const auto& e : p.eigenvalues) eig.push_back({e.real(), e.imag()});
  return {{"rho", p.rho},
          {"backend", std::string(to_string(p.backend))},
          {"closed_form_rho", optional_json(p.closed_form_rho)},
          {"sigma_min", optional_json(p.sigma_min)},
          {"sigma_max", p.sigma_max},
          {"rank", p.rank},
          {"period", optional_json(p.period)},
          {"period_from_eigs", optional_json(p.period_from_eigs)},
          {"theta_max", optional_json(p.theta_max)},
          {"primal_tangent_dim", p.primal_tangent_dim},
          {"dual_tangent_dims", p.dual_tangent_dims},
          {"eigenvalues", eig}};
}

double omega_of_c(double theta, double c) {
  const double a = 2.0 - (1.0 + theta) * c;
  const double d = 4.0 * c - (1.0 + theta) * (1.0 + theta) * c * c;
  return std::atan2(std::sqrt(std::max(d, 0.0)), a);
}

void decide(ExperimentReport& r) {
  const auto& K = r.identification.K;
  if (!r.prediction) {
    r.verdict = Verdict::Inconclusive;
    r.verdict_reason = "no rate prediction: " + r.prediction_error;
  } else if (!K) {
    r.verdict = Verdict::Inconclusive;
    r.verdict_reason = "no stable identification within the budget";
  } else if (!r.fit.rho) {
    r.verdict = Verdict::Inconclusive;
    r.verdict_reason = "fit window shorter than the minimum";
  } else if (!r.nd || !r.nd->holds) {
    r.verdict = Verdict::Inconclusive;
    r.verdict_reason = "non-degeneracy not certified";
  } else if (!(r.prediction->rho > 0.0)) {
    r.verdict = Verdict::Inconclusive;
    r.verdict_reason = "predicted rho is zero";
  } else {
    r.relative_error = std::abs(*r.fit.rho - r.prediction->rho) / r.prediction->rho;
    const bool rate_ok = *r.relative_error <= r.rate_tolerance;
    std::ostringstream msg;
    msg << "observed " << *r.fit.rho << " vs predicted " << r.prediction->rho << " (relative error "
        << *r.relative_error << ", tolerance " << r.rate_tolerance << ")";
    bool period_ok = true;
    if (r.config.experiment == ExperimentKind::Oscillation) {
      period_ok = r.period_observed && r.period_predicted &&
                  std::abs(*r.period_observed - *r.period_predicted) <= 1.0;
      msg << "; period observed " << (r.period_observed ? std::to_string(*r.period_observed) : "none")
          << " vs predicted " << (r.period_predicted ? std::to_string(*r.period_predicted) : "none");
    }
    r.verdict = rate_ok && period_ok ? Verdict::Pass : Verdict::Fail;
    r.verdict_reason = msg.str();
  }
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

RateFit fit_observed_rate(const std::vector<double>& errors, int start, double err_floor, int min_points) {
  RateFit f;
  int last = -1;
  for (int k = static_cast<int>(errors.size()) - 1; k >= 0; --k) {
    if (errors[static_cast<std::size_t>(k)] > err_floor) {
      last = k;
      break;
    }
  }
  f.first = std::max(start, 0);
  f.last = last;
  double sk = 0, sy = 0, skk = 0, sky = 0;
  for (int k = f.first; k <= last; ++k) {
    const double e = errors[static_cast<std::size_t>(k)];
    if (!(e > err_floor)) continue;
    const double y = std::log10(e);
    sk += k;
    sy += y;
    skk += static_cast<double>(k) * k;
    sky += k * y;
    ++f.points;
  }
  if (f.points < min_points) return f;
  const double n = f.points;
  const double slope = (n * sky - sk * sy) / (n * skk - sk * sk);
  f.rho = std::pow(10.0, slope);
  return f;
}

std::optional<double> detect_period(const std::vector<double>& errors, int K, double err_floor) {
  if (K < 0) return std::nullopt;
  int last = -1;
  for (int k = static_cast<int>(errors.size()) - 1; k >= K; --k) {
    if (errors[static_cast<std::size_t>(k)] > err_floor) {
      last = k;
      break;
    }
  }
  if (last - K < 4) return std::nullopt;
  std::vector<double> y;
  for (int k = K; k <= last; ++k) y.push_back(std::log10(std::max(errors[static_cast<std::size_t>(k)], err_floor)));
  const double n = static_cast<double>(y.size());
  double sk = 0, sy = 0, skk = 0, sky = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double k = static_cast<double>(i);
    sk += k;
    sy += y[i];
    skk += k * k;
    sky += k * y[i];
  }
  const double slope = (n * sky - sk * sy) / (n * skk - sk * sk);
  const double icpt = (sy - slope * sk) / n;
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - (icpt + slope * static_cast<double>(i));
  // A maximum counts only when it rises above the trough since the previous
  // one; rounding noise on a straight line never does.
  constexpr double kMinProminence = 1e-6;
  std::vector<std::size_t> peaks;
  double trough = r[0];
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    trough = std::min(trough, r[i]);
    if (r[i] > r[i - 1] && r[i] >= r[i + 1] && r[i] - trough > kMinProminence) {
      peaks.push_back(i);
      trough = r[i];
    }
  }
  if (peaks.size() < 3) return std::nullopt;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < peaks.size(); ++i) gaps.push_back(static_cast<double>(peaks[i] - peaks[i - 1]));
  std::sort(gaps.begin(), gaps.end());
  const std::size_t mid = gaps.size() / 2;
  return gaps.size() % 2 == 1 ? gaps[mid] : 0.5 * (gaps[mid - 1] + gaps[mid]);
}

double tune_c_for_period(double theta, double period) {
  if (!(period > 2.0)) throw InvalidInput("tune_c_for_period: period must exceed 2");
  if (!(theta > -1.0)) throw InvalidInput("tune_c_for_period: theta must exceed -1");
  const double target = std::numbers::pi / period;
  // Complex eigenvalues need c < 4/(1+theta)^2; theta c < 1 keeps the modulus real.
  double hi = std::min(1.0, 4.0 / ((1.0 + theta) * (1.0 + theta)));
  if (theta > 0.0) hi = std::min(hi, 1.0 / theta);
  double lo = 0.0;
  hi *= 1.0 - 1e-12;  // omega(hi) degenerates to atan2(0, 0) at theta = 1, c = 1
  if (omega_of_c(theta, hi) < target) throw InvalidInput("tune_c_for_period: period not reachable for this theta");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (omega_of_c(theta, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ExperimentReport run_problem(const GeneratedProblem& g, const ExperimentConfig& cfg) {
  ExperimentReport r;
  r.config = cfg;
  r.problem = g.problem;
  r.notes = g.notes;
  r.rate_tolerance = g.rate_tolerance;
  const PDProblem& p = r.problem;
  r.step_rule = check_step_rule(p);

  const auto ref = reference_solve(p, g.max_iter, cfg.reference_factor);
  r.reference = ref.last;
  r.reference_iterations = ref.k_final;
  r.reference_stop = std::string(to_string(ref.stop_reason));
  r.reference_residual = fixed_point_residual(p, ref.last);

  StoppingRule stop;
  stop.max_iter = g.max_iter;
  stop.step_tol = kReferenceStepTolerance;
  const auto h = pd_solve(p, zero_start(p), stop, r.reference);
  r.warnings = h.warnings;
  r.errors = h.errors;
  r.trace = trace_manifolds(h, p);
  r.identification = detect_identification(r.trace, labels_at(p, r.reference));

  try {
    r.nd = check_nd(p, r.reference, kNdTolerance);
  } catch (const InvalidInput& e) {
    r.nd_error = e.what();
  }
  try {
    r.prediction = predict_rate(p, r.reference);
  } catch (const std::exception& e) {
    r.prediction_error = e.what();
  }
  if (r.identification.K) {
    const int K = *r.identification.K;
    r.err_K = r.errors[static_cast<std::size_t>(K)];
    r.fit = fit_observed_rate(r.errors, K + kBurnIn);
  }
  decide(r);
  return r;
}

void write_profile_csv(std::ostream& out, const ExperimentReport& r) {
  out << "k,err,identified\n";
  out.precision(17);
  const auto& K = r.identification.K;
  for (std::size_t k = 0; k < r.errors.size(); ++k)
    out << k << ',' << r.errors[k] << ',' << (K && static_cast<int>(k) >= *K ? 1 : 0) << '\n';
}

Json report_to_json(const ExperimentReport& r) {
  const auto& p = r.problem;
  Json gammas = Json::array();
  for (const auto& b : p.blocks) gammas.push_back(b.gamma);
  Json j;
  j["config"] = config_json(r.config);
  j["parameters"] = {{"gamma_r", p.gamma_r},
                     {"gamma_j", gammas},
                     {"theta", p.theta},
                     {"activity_tolerance", kDefaultActivityTolerance},
                     {"burn_in", kBurnIn},
                     {"err_floor", kErrFloor},
                     {"min_fit_window", kMinFitWindow},
                     {"stable_tail", r.identification.stable_tail_length}};
  j["notes"] = r.notes;
  j["warnings"] = r.warnings;
  j["step_rule"] = {{"lhs", r.step_rule.lhs},
                    {"satisfied", r.step_rule.satisfied},
                    {"coupling", r.step_rule.coupling},
                    {"operator_norms", r.step_rule.operator_norms},
                    {"degenerate", r.step_rule.degenerate}};
  j["reference"] = {{"iterations", r.reference_iterations},
                    {"stop_reason", r.reference_stop},
                    {"residual", r.reference_residual}};
  Json per = Json::array();
  for (const auto& k : r.identification.per_block) per.push_back(optional_json(k));
  j["identification"] = {{"K", optional_json(r.identification.K)},
                         {"per_block", per},
                         {"final_labels", labels_json(r.identification.final_labels)},
                         {"stable_tail_length", r.identification.stable_tail_length}};
  j["nd"] = nd_json(r);
  j["prediction"] = r.prediction ? prediction_json(*r.prediction) : Json({{"error", r.prediction_error}});
  j["observed"] = {{"rho", optional_json(r.fit.rho)},
                   {"fit_first", r.fit.first},
                   {"fit_last", r.fit.last},
                   {"fit_points", r.fit.points}};
  j["anchor"] = {{"K", optional_json(r.identification.K)},
                 {"err_K", optional_json(r.err_K)},
                 {"rho", r.prediction ? Json(r.prediction->rho) : Json(nullptr)}};
  j["period"] = {{"predicted", optional_json(r.period_predicted)},
                 {"observed", optional_json(r.period_observed)},
                 {"omega_mismatch", optional_json(r.omega_mismatch)}};
  j["iterations"] = r.errors.empty() ? 0 : static_cast<int>(r.errors.size()) - 1;
  j["rate_tolerance"] = r.rate_tolerance;
  j["relative_error"] = optional_json(r.relative_error);
  j["verdict"] = std::string(to_string(r.verdict));
  j["verdict_reason"] = r.verdict_reason;
  Json outs = Json::array();
  for (const auto& o : r.outputs) outs.push_back(o.filename().string());
  j["outputs"] = outs;
  return j;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  if (is_sweep(cfg.experiment)) throw InvalidInput("sweeps run through run_sweep");
  GeneratedProblem g = generate_problem(cfg);
  ExperimentReport r;
  if (cfg.experiment == ExperimentKind::Oscillation) {
    if (g.problem.blocks.size() != 1) throw InvalidInput("oscillation needs a single-block base problem");
    constexpr double kTargetPeriod = 12.0;
    const double theta = cfg.theta.value_or(1.0);
    const auto pre = reference_solve(g.problem, g.max_iter, cfg.reference_factor);
    const auto geo = local_geometry(g.problem, pre.last);
    const auto sv = restricted_singular_values(g.problem.blocks[0].L, geo.primal.tangent, geo.dual[0].tangent);
    if (!sv.sigma_min_nonzero) throw InvalidInput("oscillation: restricted operator is zero");
    const double c = tune_c_for_period(theta, kTargetPeriod);
    const double gamma = std::sqrt(c) / *sv.sigma_min_nonzero;
    const double nl = operator_norm(g.problem.blocks[0].L);
    const double prod = gamma * gamma * nl * nl;
    if (!(prod < 1.0)) {
      std::ostringstream msg;
      msg << "infeasible configuration: period " << kTargetPeriod << " needs gamma_J gamma_R ||L||^2 = " << prod
          << " >= 1 (sigma_min / ||L|| too small); increase m";
      throw InvalidInput(msg.str());
    }
    g.problem.theta = theta;
    g.problem.gamma_r = gamma;
    g.problem.blocks[0].gamma = gamma;
    std::ostringstream note;
    note << "steps tuned for period " << kTargetPeriod << ": c = " << c << ", gamma_R = gamma_J = " << gamma
         << ", gamma_J gamma_R ||L||^2 = " << prod;
    g.notes.push_back(note.str());
    r = run_problem(g, cfg);
    r.period_predicted = oscillation_period(theta, gamma, gamma, *sv.sigma_min_nonzero);
    if (r.identification.K) r.period_observed = detect_period(r.errors, *r.identification.K);
    // The angle check uses the finite-difference Jacobian, independent of the
    // assembled matrix behind the prediction.
    try {
      const auto num = numeric_jacobian_rate(g.problem, r.reference);
      if (num.period_from_eigs) {
        const double w_formula = std::acos(oscillation_cos_omega(theta, gamma, gamma, *sv.sigma_min_nonzero));
        r.omega_mismatch = std::abs(w_formula - std::numbers::pi / *num.period_from_eigs);
      }
    } catch (const std::exception& e) {
      r.warnings.push_back(std::string("numeric Jacobian unavailable: ") + e.what());
    }
    decide(r);
  } else {
    r = run_problem(g, cfg);
  }
  if (write_outputs) {
    std::filesystem::create_directories(cfg.out_dir);
    const auto profile = cfg.out_dir / "profile.csv";
    const auto report = cfg.out_dir / "report.json";
    r.outputs = {profile, report};
    std::ofstream out(profile);
    if (!out) throw InvalidInput("cannot write " + profile.string());
    write_profile_csv(out, r);
    write_json_file(report, report_to_json(r));
  }
  return r;
}

SweepResult run_sweep(const ExperimentConfig& cfg, bool write_outputs) {
  if (!is_sweep(cfg.experiment)) throw InvalidInput("not a sweep experiment");
  SweepResult s;
  s.kind = cfg.experiment;
  const GeneratedProblem base = generate_problem(cfg);
  std::string param;
  std::vector<double> values;
  switch (cfg.experiment) {
    case ExperimentKind::SweepGamma:
      param = "product";
      values = {0.3, 0.6, 0.8, 0.99};
      break;
    case ExperimentKind::SweepTheta:
      param = "theta";
      values = {0.5, 0.75, 1.0, 2.0};
      break;
    default:
      param = "gamma_r";
      values = {0.25, 0.5, 1.0, 2.0};
      break;
  }
  if (write_outputs) std::filesystem::create_directories(cfg.out_dir);
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row;
    row.param = param;
    row.value = values[i];
    ExperimentConfig c = cfg;
    c.gamma_r.reset();
    c.gamma_j.reset();
    if (cfg.experiment == ExperimentKind::SweepGamma) {
      c.product = values[i];
      c.theta = 1.0;
    } else if (cfg.experiment == ExperimentKind::SweepTheta) {
      c.product = 0.9;
      c.theta = values[i];
    } else {
      c.product = 0.99;
      c.theta = 1.0;
      c.gamma_r = values[i];
    }
    try {
      GeneratedProblem g = base;
      apply_step_overrides(g.problem, c);
      const auto r = run_problem(g, c);
      row.K = r.identification.K;
      if (r.prediction) row.predicted = r.prediction->rho;
      row.observed = r.fit.rho;
      row.verdict = r.verdict;
      if (write_outputs) {
        row.profile = "profile_" + std::to_string(i) + ".csv";
        std::ofstream out(cfg.out_dir / row.profile);
        write_profile_csv(out, r);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    s.rows.push_back(std::move(row));
  }

  bool ok = true;
  for (const auto& row : s.rows) ok = ok && row.predicted.has_value();
  if (ok) {
    for (std::size_t i = 1; i < s.rows.size(); ++i) {
      const double a = *s.rows[i - 1].predicted, b = *s.rows[i].predicted;
      if (cfg.experiment == ExperimentKind::SweepGammaSplit)
        ok = ok && std::abs(a - b) <= 1e-9 * std::max(a, b);
      else
        ok = ok && b < a;
    }
  }
  s.monotone = ok;

  if (write_outputs) {
    std::ofstream out(cfg.out_dir / "sweep.csv");
    out.precision(17);
    out << "param,value,K,predicted_rho,observed_rho,verdict,profile\n";
    for (const auto& row : s.rows) {
      out << row.param << ',' << Json(row.value).dump() << ',';
      if (row.K) out << *row.K;
      out << ',';
      if (row.predicted) out << *row.predicted;
      out << ',';
      if (row.observed) out << *row.observed;
      out << ',' << (row.error.empty() ? std::string(to_string(row.verdict)) : "error") << ',' << row.profile
          << '\n';
    }
    Json rows = Json::array();
    for (const auto& row : s.rows)
      rows.push_back({{"param", row.param},
                      {"value", row.value},
                      {"K", optional_json(row.K)},
                      {"predicted_rho", optional_json(row.predicted)},
                      {"observed_rho", optional_json(row.observed)},
                      {"verdict", std::string(to_string(row.verdict))},
                      {"error", row.error},
                      {"profile", row.profile}});
    write_json_file(cfg.out_dir / "sweep.json",
                    {{"config", config_json(cfg)}, {"monotone", s.monotone}, {"rows", rows}});
  }
  return s;
}

}  // namespace pdsplit
