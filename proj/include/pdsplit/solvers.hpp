#pragma once

#include "pdsplit/functions.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdsplit {

/// One dual term (J_i inf-conv G_i)(L_i x). J_i is stored in primal form; its
/// conjugate prox goes through the Moreau identity.
struct DualBlock {
  ConvexFunctionSpec J;
  SmoothFunctionSpec gstar;  // G_i^*, dimension out_dim(L)
  LinearOperator L;
  double gamma = 1.0;        // gamma_J for this block
};

struct PDProblem {
  ConvexFunctionSpec R;
  SmoothFunctionSpec F;
  std::vector<DualBlock> blocks;
  double gamma_r = 1.0;
  double theta = 1.0;

  Index primal_dim() const { return R.dim; }
  /// n + sum_i m_i
  Index total_dim() const;
  /// Throws InvalidInput on any dimension or parameter inconsistency.
  void validate() const;
};

/// z = (x, v_1, ..., v_m).
struct PrimalDualPoint {
  Vector x;
  std::vector<Vector> v;

  Vector stacked() const;
  static PrimalDualPoint unstack(const PDProblem& p, const Vector& z);
};

struct StoppingRule {
  int max_iter = 1000;
  /// Stop when ||z_{k+1} - z_k||_inf <= step_tol.
  double step_tol = 1e-14;
  /// Stop when ||z_k - z*|| <= error_tol (only with a reference); 0 disables.
  double error_tol = 0.0;
  bool record_iterates = true;
};

enum class StopReason { MaxIterations, StepTolerance, ErrorTolerance };
std::string_view to_string(StopReason r);

/// Update order. PrimalFirst updates x, extrapolates, then v. DualFirst updates v with
/// the extrapolated point of the previous step first (x_bar_0 = x_0), then x.
enum class UpdateOrder { PrimalFirst, DualFirst };

struct RunHistory {
  /// z_0 .. z_{k_final}; empty unless StoppingRule::record_iterates.
  std::vector<PrimalDualPoint> iterates;
  PrimalDualPoint last;
  std::optional<PrimalDualPoint> reference;
  /// errors[k] = ||z_k - z*||_2, present iff reference was supplied.
  std::vector<double> errors;
  /// step_norms[k] = ||z_k - z_{k-1}||_2, step_norms[0] = 0.
  std::vector<double> step_norms;
  /// manifold_trace[k][0] is the label of R at x_k, [k][i+1] of J_i^* at v_{i,k}.
  std::vector<std::vector<ManifoldLabel>> manifold_trace;
  int k_final = 0;
  StopReason stop_reason = StopReason::MaxIterations;
  std::vector<std::string> warnings;
};

struct StepRuleReport {
  double lhs = 0.0;
  bool satisfied = false;
  /// gamma_J gamma_R ||L||^2, or gamma_R sum_i gamma_Ji ||L_i||^2.
  double coupling = 0.0;
  std::vector<double> operator_norms;
  bool degenerate = false;  // F and every G_i^* are Zero
};

/// Single block: 2 min(beta_F, beta_G) / max(gamma) (1 - sqrt(gJ gR ||L||^2)) > 1.
/// Several blocks: the product-space rule. When F and all
/// G_i^* vanish the beta -> inf limit is used: lhs = 1 / coupling, so the rule
/// reads coupling < 1. With no dual blocks lhs = 2 beta_F / gamma_R.
StepRuleReport check_step_rule(const PDProblem& p);

/// One step of the primal-dual map T: z_k -> z_{k+1} (PrimalFirst order).
PrimalDualPoint pd_step(const PDProblem& p, const PrimalDualPoint& z);

RunHistory pd_solve(const PDProblem& p, const PrimalDualPoint& z0, const StoppingRule& stop,
                    const std::optional<PrimalDualPoint>& reference = std::nullopt,
                    UpdateOrder order = UpdateOrder::PrimalFirst);

/// Forward-backward iteration; requires 0 < gamma < 2 beta_F.
RunHistory fb_solve(const ConvexFunctionSpec& R, const SmoothFunctionSpec& F, double gamma, const Vector& x0,
                    const StoppingRule& stop, const std::optional<Vector>& reference = std::nullopt);

struct DrHistory {
  std::vector<Vector> u;  // u_0 is empty-sized; u_k for k >= 1
  std::vector<Vector> z;
  std::vector<Vector> x;
  int k_final = 0;
  StopReason stop_reason = StopReason::MaxIterations;
};

/// Non-relaxed Douglas-Rachford on R + J with x_0 = prox_{gamma R}(z_0).
DrHistory dr_solve(const ConvexFunctionSpec& R, const ConvexFunctionSpec& J, double gamma, const Vector& z0,
                   const StoppingRule& stop);

/// ||z - T(z)||_inf with the problem's own step sizes.
double fixed_point_residual(const PDProblem& p, const PrimalDualPoint& z);

/// Columns k, err, dx_norm, then one label-hash column per function when a
/// manifold trace is present.
void write_history_csv(std::ostream& out, const RunHistory& h);

}  // namespace pdsplit
