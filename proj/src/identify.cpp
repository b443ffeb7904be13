#include "pdsplit/identify.hpp"

#include <algorithm>
#include <sstream>

namespace pdsplit {

std::vector<ManifoldLabel> labels_at(const PDProblem& p, const PrimalDualPoint& z, double tol_active) {
  std::vector<ManifoldLabel> out;
  out.reserve(p.blocks.size() + 1);
  out.push_back(manifold_label(p.R, z.x, tol_active));
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    out.push_back(conjugate_manifold_label(p.blocks[i].J, z.v[i], tol_active));
  return out;
}

std::vector<std::vector<ManifoldLabel>> trace_manifolds(const RunHistory& h, const PDProblem& p,
                                                        double tol_active) {
  if (h.iterates.empty()) throw InvalidInput("trace_manifolds: history has no recorded iterates");
  std::vector<std::vector<ManifoldLabel>> trace;
  trace.reserve(h.iterates.size());
  for (const auto& z : h.iterates) trace.push_back(labels_at(p, z, tol_active));
  return trace;
}

IdentificationReport detect_identification(const std::vector<std::vector<ManifoldLabel>>& trace,
                                           const std::vector<ManifoldLabel>& reference_labels, int tail) {
  IdentificationReport r;
  r.final_labels = reference_labels;
  r.stable_tail_length = tail;
  const int len = static_cast<int>(trace.size());
  int overall = 0;
  bool all = true;
  for (std::size_t f = 0; f < reference_labels.size(); ++f) {
    int k = len;
    while (k > 0 && trace[static_cast<std::size_t>(k - 1)].at(f) == reference_labels[f]) --k;
    if (len - k >= tail) {
      r.per_block.emplace_back(k);
      overall = std::max(overall, k);
    } else {
      r.per_block.emplace_back(std::nullopt);
      all = false;
    }
  }
  if (all) r.K = overall;
  return r;
}

NdReport check_nd(const PDProblem& p, const PrimalDualPoint& z, double tol, double residual_tol) {
  NdReport r;
  r.residual = fixed_point_residual(p, z);
  double scale = z.x.lpNorm<Eigen::Infinity>();
  for (const auto& v : z.v) scale = std::max(scale, v.lpNorm<Eigen::Infinity>());
  if (r.residual > residual_tol * std::max(1.0, scale)) {
    std::ostringstream msg;
    msg << "check_nd: pair is not stationary (fixed-point residual " << r.residual << ")";
    throw InvalidInput(msg.str());
  }
  Vector u = p.F.is_zero() ? Vector(Vector::Zero(z.x.size())) : Vector(-p.F.gradient(z.x));
  for (std::size_t i = 0; i < p.blocks.size(); ++i) u -= p.blocks[i].L.adjoint_apply(z.v[i]);
  r.primal = nd_certificate(p.R, z.x, u, tol);
  r.holds = r.primal.holds;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    Vector w = b.L.apply(z.x);
    if (!b.gstar.is_zero()) w -= b.gstar.gradient(z.v[i]);
    r.dual.push_back(nd_certificate(b.J, w, z.v[i], tol));
    r.holds = r.holds && r.dual.back().holds;
  }
  return r;
}

}  // namespace pdsplit
