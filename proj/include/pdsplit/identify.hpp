#pragma once

#include "pdsplit/solvers.hpp"

#include <optional>
#include <vector>

namespace pdsplit {

inline constexpr int kStableTail = 25;
inline constexpr double kStationarityTolerance = 1e-8;

/// Labels of R at x and of each J_i^* at v_i.
std::vector<ManifoldLabel> labels_at(const PDProblem& p, const PrimalDualPoint& z,
                                     double tol_active = kDefaultActivityTolerance);

/// One label vector per recorded iterate. Requires recorded iterates.
std::vector<std::vector<ManifoldLabel>> trace_manifolds(const RunHistory& h, const PDProblem& p,
                                                        double tol_active = kDefaultActivityTolerance);

struct IdentificationReport {
  std::optional<int> K;
  std::vector<ManifoldLabel> final_labels;
  std::vector<std::optional<int>> per_block;  // [0] is R, [i+1] is J_i^*
  int stable_tail_length = kStableTail;
};

/// Per function, K is the first index from which every later label equals the
/// reference one, reported only if that tail spans at least `tail` entries.
/// The overall K is the max over functions, or empty if any is empty.
IdentificationReport detect_identification(const std::vector<std::vector<ManifoldLabel>>& trace,
                                           const std::vector<ManifoldLabel>& reference_labels,
                                           int tail = kStableTail);

struct NdReport {
  bool holds = false;
  NdCertificate primal;
  std::vector<NdCertificate> dual;
  double residual = 0.0;
};

/// Evaluates -sum L_i^* v_i - grad F(x) in ri dR(x), and for every block
/// v_i in ri dJ_i(L_i x - grad G_i^*(v_i)), the primal-form equivalent of the
/// dual inclusion for the supported kinds. Rejects pairs whose fixed-point
/// residual exceeds residual_tol * max(1, ||z||_inf).
NdReport check_nd(const PDProblem& p, const PrimalDualPoint& z, double tol,
                  double residual_tol = kStationarityTolerance);

}  // namespace pdsplit
