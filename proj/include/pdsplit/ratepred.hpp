#pragma once

#include "pdsplit/solvers.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace pdsplit {

inline constexpr double kOneClusterTolerance = 1e-9;
/// Finite-difference noise spreads the eigenvalue-1 cluster of a numeric
/// Jacobian, so that backend excludes a wider neighbourhood of 1.
inline constexpr double kNumericOneClusterTolerance = 1e-6;
inline constexpr double kAngleZeroTolerance = 1e-7;

using Complex = std::complex<double>;

enum class RateBackend { Analytic, PolyhedralClosedForm, NumericJacobian };
std::string_view to_string(RateBackend b);

struct LocalGeometry {
  ManifoldDescriptor primal;
  std::vector<ManifoldDescriptor> dual;
  std::vector<Matrix> restricted;  // L_bar_i, out_dim x in_dim
};

/// Tangent spaces of R at x* and J_i^* at v_i*, and the restricted operators.
LocalGeometry local_geometry(const PDProblem& p, const PrimalDualPoint& z,
                             double tol_active = kDefaultActivityTolerance);

/// Linearized fixed-point matrix in ambient coordinates. One block uses the
/// problem's theta; several blocks use the product-space form with theta = 1.
/// Empty when a Riemannian Hessian is unavailable (curved nuclear manifold).
std::optional<Matrix> build_mpd(const PDProblem& p, const PrimalDualPoint& z,
                                double tol_active = kDefaultActivityTolerance);

struct SpectralRadius {
  double rho = 0.0;
  std::vector<Complex> eigenvalues;
  /// Eigenvalue attaining rho, when one exists off the unit cluster.
  std::optional<Complex> leading;
};

/// rho = max |lambda| over eigenvalues with |lambda - 1| > one_cluster_tol.
SpectralRadius convergent_part_radius(const Matrix& M, double one_cluster_tol = kOneClusterTolerance);

/// sqrt(1 - theta gR gJ sigma_min^2); rejects a negative radicand.
double closed_form_rate(double theta, double gamma_r, double gamma_j, double sigma_min);

/// Both roots per sigma of the theta = 0 polyhedral characteristic equation.
std::vector<Complex> arrow_hurwicz_eigs(double gamma_r, double gamma_j, const std::vector<double>& sigmas);

/// Roots of lambda^2 - (2 - (1+theta)c) lambda + (1 - theta c) = 0 with
/// c = gR gJ sigma^2; the polyhedral eigenvalues attached to one sigma.
std::pair<Complex, Complex> polyhedral_eigenpair(double theta, double c);

/// cos(omega) = (2 - (1+theta)c) / (2 sqrt(1 - theta c)).
double oscillation_cos_omega(double theta, double gamma_r, double gamma_j, double sigma_min);

/// pi / omega for the leading polyhedral eigenvalue; empty when it is real.
/// The double root 0 at theta = 1, c = 1 is read as the limit period 2.
std::optional<double> oscillation_period(double theta, double gamma_r, double gamma_j, double sigma_min);

struct AngleReport {
  std::vector<double> principal_angles;  // nondecreasing in [0, pi/2]
  std::optional<double> friedrichs;      // theta_{d+1}, d = dim(T1 cap T2)
  Index intersection_dim = 0;
};

AngleReport principal_angles(const SubspaceBasis& T1, const SubspaceBasis& T2,
                             double angle_zero_tol = kAngleZeroTolerance);

/// 1 / (gR gJ sigma_max^2); empty when sigma_max == 0 (no bound).
std::optional<double> theta_upper_bound(double gamma_r, double gamma_j, double sigma_max);

struct RatePrediction {
  Matrix M;
  std::vector<Complex> eigenvalues;
  double rho = 0.0;
  std::optional<double> closed_form_rho;
  std::optional<double> sigma_min;
  double sigma_max = 0.0;
  Index rank = 0;
  std::optional<double> period;           // closed form, polyhedral single block
  std::optional<double> period_from_eigs; // pi / |arg| of the leading eigenvalue
  std::optional<double> theta_max;
  RateBackend backend = RateBackend::Analytic;
  Index primal_tangent_dim = 0;
  std::vector<Index> dual_tangent_dims;
};

struct NumericJacobianOptions {
  double h = 0.0;  // 0 selects 1e-6 (1 + ||z*||)
  double stationarity_tol = 1e-10;
  double one_cluster_tol = kNumericOneClusterTolerance;
};

/// Dense central-difference Jacobian of the PD step map at a fixed point.
/// Throws InvalidInput when z is not stationary and NumericalError when the
/// forward and backward differences disagree (non-differentiable point).
Matrix numeric_jacobian(const PDProblem& p, const PrimalDualPoint& z, const NumericJacobianOptions& opts = {});
RatePrediction numeric_jacobian_rate(const PDProblem& p, const PrimalDualPoint& z,
                                     const NumericJacobianOptions& opts = {});

/// Chooses the backend: polyhedral closed form (one block, F = G^* = 0,
/// polyhedral R and J^*), analytic linearization when Hessians exist and the
/// formula covers theta, numeric Jacobian otherwise.
RatePrediction predict_rate(const PDProblem& p, const PrimalDualPoint& z,
                            double tol_active = kDefaultActivityTolerance);

}  // namespace pdsplit
