#include "pdsplit/solvers.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace pdsplit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const Vector& v, const char* what, int k) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite " << what << " at iteration " << k;
    throw NumericalError(msg.str());
  }
}

double distance(const PrimalDualPoint& a, const PrimalDualPoint& b) {
  double s = (a.x - b.x).squaredNorm();
  for (std::size_t i = 0; i < a.v.size(); ++i) s += (a.v[i] - b.v[i]).squaredNorm();
  return std::sqrt(s);
}

double max_abs_difference(const PrimalDualPoint& a, const PrimalDualPoint& b) {
  double m = (a.x - b.x).lpNorm<Eigen::Infinity>();
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, (a.v[i] - b.v[i]).lpNorm<Eigen::Infinity>());
  return m;
}

// v_i+ = prox_{gJ J_i^*}(v_i - gJ grad G_i^*(v_i) + gJ L_i xbar)
Vector dual_update(const DualBlock& b, const Vector& v, const Vector& xbar) {
  Vector arg = v + b.gamma * b.L.apply(xbar);
  if (!b.gstar.is_zero()) arg -= b.gamma * b.gstar.gradient(v);
  return prox_conjugate(b.J, b.gamma, arg);
}

Vector primal_update(const PDProblem& p, const Vector& x, const std::vector<Vector>& v) {
  Vector arg = p.F.is_zero() ? Vector(x) : Vector(x - p.gamma_r * p.F.gradient(x));
  if (!p.blocks.empty()) {
    Vector coupling = Vector::Zero(x.size());
    for (std::size_t i = 0; i < p.blocks.size(); ++i) coupling += p.blocks[i].L.adjoint_apply(v[i]);
    arg -= p.gamma_r * coupling;
  }
  return prox(p.R, p.gamma_r, arg);
}

void check_start(const PDProblem& p, const PrimalDualPoint& z0) {
  if (z0.x.size() != p.primal_dim()) throw InvalidInput("x0 has the wrong dimension");
  if (z0.v.size() != p.blocks.size()) throw InvalidInput("v0 must have one vector per dual block");
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    if (z0.v[i].size() != p.blocks[i].L.out_dim()) throw InvalidInput("v0 block has the wrong dimension");
}

}  // namespace

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::StepTolerance: return "step_tolerance";
    case StopReason::ErrorTolerance: return "error_tolerance";
  }
  return "unknown";
}

Index PDProblem::total_dim() const {
  Index n = primal_dim();
  for (const auto& b : blocks) n += b.L.out_dim();
  return n;
}

void PDProblem::validate() const {
  R.validate();
  if (F.dim != R.dim) throw InvalidInput("F and R dimensions differ");
  if (!(gamma_r > 0.0) || !std::isfinite(gamma_r)) throw InvalidInput("gamma_R must be positive");
  if (!(theta >= -1.0) || !std::isfinite(theta)) throw InvalidInput("theta must be >= -1");
  for (const auto& b : blocks) {
    b.J.validate();
    if (b.L.in_dim() != R.dim) throw InvalidInput("L_i in_dim must equal dim R");
    if (b.L.out_dim() != b.J.dim) throw InvalidInput("L_i out_dim must equal dim J_i");
    if (b.gstar.dim != b.J.dim) throw InvalidInput("G_i^* dimension must equal dim J_i");
    if (!(b.gamma > 0.0) || !std::isfinite(b.gamma)) throw InvalidInput("gamma_J must be positive");
  }
}

Vector PrimalDualPoint::stacked() const {
  Index n = x.size();
  for (const auto& vi : v) n += vi.size();
  Vector z(n);
  z.head(x.size()) = x;
  Index off = x.size();
  for (const auto& vi : v) {
    z.segment(off, vi.size()) = vi;
    off += vi.size();
  }
  return z;
}

PrimalDualPoint PrimalDualPoint::unstack(const PDProblem& p, const Vector& z) {
  if (z.size() != p.total_dim()) throw InvalidInput("stacked vector has the wrong dimension");
  PrimalDualPoint out;
  out.x = z.head(p.primal_dim());
  Index off = p.primal_dim();
  for (const auto& b : p.blocks) {
    out.v.push_back(z.segment(off, b.L.out_dim()));
    off += b.L.out_dim();
  }
  return out;
}

StepRuleReport check_step_rule(const PDProblem& p) {
  StepRuleReport r;
  double beta = p.F.beta();
  double max_gamma = p.gamma_r;
  for (const auto& b : p.blocks) {
    const double nl = operator_norm(b.L);
    r.operator_norms.push_back(nl);
    r.coupling += b.gamma * nl * nl;
    beta = std::min(beta, b.gstar.beta());
    max_gamma = std::max(max_gamma, b.gamma);
  }
  r.coupling *= p.gamma_r;
  if (p.blocks.empty()) {
    r.lhs = 2.0 * beta / p.gamma_r;
  } else if (std::isinf(beta)) {
    r.degenerate = true;
    r.lhs = r.coupling > 0.0 ? 1.0 / r.coupling : kInf;
  } else {
    r.lhs = 2.0 * beta / max_gamma * (1.0 - std::sqrt(r.coupling));
  }
  r.satisfied = r.lhs > 1.0;
  return r;
}

PrimalDualPoint pd_step(const PDProblem& p, const PrimalDualPoint& z) {
  PrimalDualPoint next;
  next.x = primal_update(p, z.x, z.v);
  const Vector xbar = next.x + p.theta * (next.x - z.x);
  next.v.reserve(p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) next.v.push_back(dual_update(p.blocks[i], z.v[i], xbar));
  return next;
}

double fixed_point_residual(const PDProblem& p, const PrimalDualPoint& z) {
  return max_abs_difference(pd_step(p, z), z);
}

RunHistory pd_solve(const PDProblem& p, const PrimalDualPoint& z0, const StoppingRule& stop,
                    const std::optional<PrimalDualPoint>& reference, UpdateOrder order) {
  p.validate();
  check_start(p, z0);
  if (stop.max_iter < 0) throw InvalidInput("max_iter must be >= 0");
  if (reference) check_start(p, *reference);

  RunHistory h;
  h.reference = reference;
  if (p.theta == 1.0 && !check_step_rule(p).satisfied)
    h.warnings.emplace_back("step rule violated; no global convergence guarantee");
  if (p.theta > 1.0 || p.theta <= 0.0)
    h.warnings.emplace_back("theta outside (0,1]: no global convergence guarantee");

  PrimalDualPoint z = z0;
  Vector xbar = z0.x;  // DualFirst state
  auto record = [&](const PrimalDualPoint& pt, double dx) {
    if (stop.record_iterates) h.iterates.push_back(pt);
    h.step_norms.push_back(dx);
    if (reference) h.errors.push_back(distance(pt, *reference));
  };
  record(z, 0.0);

  int k = 0;
  while (k < stop.max_iter) {
    PrimalDualPoint next;
    if (order == UpdateOrder::PrimalFirst) {
      next = pd_step(p, z);
    } else {
      next.v.reserve(p.blocks.size());
      for (std::size_t i = 0; i < p.blocks.size(); ++i) next.v.push_back(dual_update(p.blocks[i], z.v[i], xbar));
      next.x = primal_update(p, z.x, next.v);
      xbar = next.x + p.theta * (next.x - z.x);
    }
    ++k;
    require_finite(next.x, "primal iterate", k);
    for (const auto& vi : next.v) require_finite(vi, "dual iterate", k);
    const double step_inf = max_abs_difference(next, z);
    record(next, distance(next, z));
    z = std::move(next);
    if (step_inf <= stop.step_tol) {
      h.stop_reason = StopReason::StepTolerance;
      break;
    }
    if (reference && stop.error_tol > 0.0 && h.errors.back() <= stop.error_tol) {
      h.stop_reason = StopReason::ErrorTolerance;
      break;
    }
  }
  h.k_final = k;
  h.last = std::move(z);
  return h;
}

RunHistory fb_solve(const ConvexFunctionSpec& R, const SmoothFunctionSpec& F, double gamma, const Vector& x0,
                    const StoppingRule& stop, const std::optional<Vector>& reference) {
  const double beta = F.beta();
  if (!(gamma > 0.0) || !(gamma < 2.0 * beta)) throw InvalidInput("fb_solve: gamma must lie in (0, 2 beta_F)");
  if (x0.size() != R.dim || F.dim != R.dim) throw InvalidInput("fb_solve: dimension mismatch");
  if (reference && reference->size() != R.dim) throw InvalidInput("fb_solve: reference dimension mismatch");

  RunHistory h;
  if (reference) h.reference = PrimalDualPoint{*reference, {}};
  Vector x = x0;
  auto record = [&](const Vector& pt, double dx) {
    if (stop.record_iterates) h.iterates.push_back(PrimalDualPoint{pt, {}});
    h.step_norms.push_back(dx);
    if (reference) h.errors.push_back((pt - *reference).norm());
  };
  record(x, 0.0);
  int k = 0;
  while (k < stop.max_iter) {
    Vector arg = F.is_zero() ? Vector(x) : Vector(x - gamma * F.gradient(x));
    Vector next = prox(R, gamma, arg);
    ++k;
    require_finite(next, "primal iterate", k);
    const double step_inf = (next - x).lpNorm<Eigen::Infinity>();
    record(next, (next - x).norm());
    x = std::move(next);
    if (step_inf <= stop.step_tol) {
      h.stop_reason = StopReason::StepTolerance;
      break;
    }
    if (reference && stop.error_tol > 0.0 && h.errors.back() <= stop.error_tol) {
      h.stop_reason = StopReason::ErrorTolerance;
      break;
    }
  }
  h.k_final = k;
  h.last = PrimalDualPoint{std::move(x), {}};
  return h;
}

DrHistory dr_solve(const ConvexFunctionSpec& R, const ConvexFunctionSpec& J, double gamma, const Vector& z0,
                   const StoppingRule& stop) {
  if (!(gamma > 0.0)) throw InvalidInput("dr_solve: gamma must be positive");
  if (z0.size() != R.dim || J.dim != R.dim) throw InvalidInput("dr_solve: dimension mismatch");
  DrHistory h;
  Vector z = z0;
  Vector x = prox(R, gamma, z);
  h.u.emplace_back();
  h.z.push_back(z);
  h.x.push_back(x);
  int k = 0;
  while (k < stop.max_iter) {
    const Vector u = prox(J, gamma, 2.0 * x - z);
    const Vector znext = z + u - x;
    const Vector xnext = prox(R, gamma, znext);
    ++k;
    require_finite(znext, "DR iterate", k);
    const double step_inf = std::max((znext - z).lpNorm<Eigen::Infinity>(), (xnext - x).lpNorm<Eigen::Infinity>());
    h.u.push_back(u);
    h.z.push_back(znext);
    h.x.push_back(xnext);
    z = znext;
    x = xnext;
    if (step_inf <= stop.step_tol) {
      h.stop_reason = StopReason::StepTolerance;
      break;
    }
  }
  h.k_final = k;
  return h;
}

void write_history_csv(std::ostream& out, const RunHistory& h) {
  const std::size_t rows = h.step_norms.size();
  const bool labels = h.manifold_trace.size() == rows && rows > 0;
  out << "k,err,dx_norm";
  if (labels) {
    out << ",label_R";
    for (std::size_t i = 1; i < h.manifold_trace[0].size(); ++i) out << ",label_J" << i;
  }
  out << '\n';
  out.precision(17);
  for (std::size_t k = 0; k < rows; ++k) {
    out << k << ',';
    if (k < h.errors.size()) out << h.errors[k];
    out << ',' << h.step_norms[k];
    if (labels)
      for (const auto& l : h.manifold_trace[k]) out << ',' << l.hash();
    out << '\n';
  }
}

}  // namespace pdsplit
