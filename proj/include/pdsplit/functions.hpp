#pragma once

#include "pdsplit/linops.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pdsplit {

enum class FunctionKind {
  L1,
  GroupL12,
  LInf,
  Nuclear,
  IndicatorPoint,
  IndicatorLInfBall,
  IndicatorL1Ball,
  Zero,
};

std::string_view to_string(FunctionKind kind);
FunctionKind function_kind_from_string(std::string_view name);

/// Closed proper convex function from the supported registry.
///
/// Vectors are flat; a Nuclear function of an n1 x n2 matrix acts on its
/// column-major vectorization of length n1*n2. For indicator kinds the scale
/// is irrelevant (mu * indicator == indicator).
struct ConvexFunctionSpec {
  FunctionKind kind = FunctionKind::Zero;
  Index dim = 0;
  double scale = 1.0;
  std::vector<std::vector<Index>> blocks;  // GroupL12
  Index rows = 0;                          // Nuclear
  Index cols = 0;                          // Nuclear
  Vector center;                           // indicators
  double radius = 0.0;                     // ball indicators

  static ConvexFunctionSpec l1(Index n, double scale = 1.0);
  static ConvexFunctionSpec group_l12(Index n, std::vector<std::vector<Index>> blocks, double scale = 1.0);
  /// Consecutive equal-size blocks {0..s-1}, {s..2s-1}, ...
  static ConvexFunctionSpec group_l12_uniform(Index n, Index block_size, double scale = 1.0);
  static ConvexFunctionSpec linf(Index n, double scale = 1.0);
  static ConvexFunctionSpec nuclear(Index rows, Index cols, double scale = 1.0);
  static ConvexFunctionSpec indicator_point(Vector b);
  static ConvexFunctionSpec indicator_linf_ball(Vector center, double radius);
  static ConvexFunctionSpec indicator_l1_ball(Vector center, double radius);
  static ConvexFunctionSpec zero(Index n);

  /// Throws InvalidInput if the payload is inconsistent (e.g. blocks that do
  /// not partition {0..dim-1}).
  void validate() const;
  bool is_polyhedral() const;
  /// Polyhedrality of the Legendre conjugate.
  bool conjugate_is_polyhedral() const;
};

/// Smooth convex term with Lipschitz gradient: zero or 1/2 ||K x - b||^2.
struct SmoothFunctionSpec {
  enum class Kind { Zero, Quadratic };
  Kind kind = Kind::Zero;
  Index dim = 0;
  std::optional<LinearOperator> K;
  Vector b;

  static SmoothFunctionSpec zero(Index n);
  static SmoothFunctionSpec quadratic(LinearOperator K, Vector b);

  bool is_zero() const { return kind == Kind::Zero; }
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// Dense Hessian (constant for the supported kinds).
  Matrix hessian() const;
  /// beta such that the gradient is (1/beta)-Lipschitz; +inf for Zero.
  double beta() const;
};

/// Discrete identifier of an active manifold. Two labels compare equal iff
/// the iterates lie on the same manifold of the same function.
struct ManifoldLabel {
  std::string family;          // "support", "blocks", "linf_face", "rank", "full", "singleton", ...
  std::vector<Index> active;   // active index / block set, sorted
  std::vector<int> signs;      // sign pattern on `active` when part of the label
  Index rank = 0;              // Nuclear / spectral-ball faces

  bool operator==(const ManifoldLabel&) const = default;
  /// FNV-1a over the label contents; stable across runs and platforms.
  std::uint64_t hash() const;
  std::string to_string() const;
};

struct ManifoldDescriptor {
  ManifoldLabel label;
  SubspaceBasis tangent;
  Matrix U;  // Nuclear: leading left singular vectors
  Matrix V;  // Nuclear: leading right singular vectors

  Index dim() const { return tangent.dim(); }
};

inline constexpr double kDefaultActivityTolerance = 1e-8;

/// prox_{gamma f}(x): the minimizer of 1/2||z - x||^2 + gamma f(z).
Vector prox(const ConvexFunctionSpec& f, double gamma, const Vector& x);

/// prox_{gamma f*}(x) evaluated through the Moreau decomposition
/// x - gamma * prox_{f/gamma}(x/gamma); f* is never formed.
Vector prox_conjugate(const ConvexFunctionSpec& f, double gamma, const Vector& x);

struct NdCertificate {
  bool holds = false;
  /// Slack of the strict inclusion; +inf when no inequality is active
  /// (e.g. the subdifferential is the whole space), negative when the
  /// equality part of the inclusion is violated.
  double margin = 0.0;
};

/// Tests u in ri(df(x)). The equality part (e.g. u_i = sign(x_i) on the
/// support) is checked to a fixed consistency tolerance; the inequality part
/// must hold with slack > tol.
NdCertificate nd_certificate(const ConvexFunctionSpec& f, const Vector& x, const Vector& u, double tol);

/// Non-strict membership u in df(x) to tolerance tol.
bool in_subdifferential(const ConvexFunctionSpec& f, const Vector& x, const Vector& u, double tol);

/// Active manifold of f at x; activity is relative to the natural magnitude
/// of x (||x||_inf, largest block norm, largest singular value, ball radius).
ManifoldDescriptor manifold_at(const ConvexFunctionSpec& f, const Vector& x,
                               double tol_active = kDefaultActivityTolerance);

/// Active manifold of the conjugate f* at v, derived from the conjugate pair
/// (e.g. l1 <-> linf-ball indicator, point indicator <-> linear function).
ManifoldDescriptor conjugate_manifold_at(const ConvexFunctionSpec& f, const Vector& v,
                                         double tol_active = kDefaultActivityTolerance);

/// Label of manifold_at / conjugate_manifold_at without building the tangent
/// basis; cheap enough to call once per iteration.
ManifoldLabel manifold_label(const ConvexFunctionSpec& f, const Vector& x,
                             double tol_active = kDefaultActivityTolerance);
ManifoldLabel conjugate_manifold_label(const ConvexFunctionSpec& f, const Vector& v,
                                       double tol_active = kDefaultActivityTolerance);

/// P_T Hess_M f(x) P_T as an ambient dim x dim matrix. The tilt vector of the
/// shifted function only matters through the Weingarten term, which vanishes
/// for every kind this returns a value for. Empty for Nuclear.
std::optional<Matrix> riemannian_hessian(const ConvexFunctionSpec& f, const Vector& x,
                                         const Vector& tilt,
                                         double tol_active = kDefaultActivityTolerance);

/// Riemannian Hessian of f* at v; empty when the conjugate manifold is curved
/// (GroupL12, Nuclear).
std::optional<Matrix> conjugate_riemannian_hessian(const ConvexFunctionSpec& f, const Vector& v,
                                                   double tol_active = kDefaultActivityTolerance);

/// Euclidean projection onto {y : ||y||_1 <= radius}; sort-based, exact.
Vector project_l1_ball(const Vector& y, double radius);

/// Threshold lambda >= 0 with sum_i max(|y_i| - lambda, 0) = radius, or 0 if
/// y already lies in the ball.
double l1_ball_threshold(const Vector& y, double radius);

}  // namespace pdsplit
