#include "pdsplit/ratepred.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pdsplit {

namespace {

Matrix projector_of(const SubspaceBasis& t) { return t.basis() * t.basis().transpose(); }

struct SingularSummary {
  std::optional<double> sigma_min;
  double sigma_max = 0.0;
  Index rank = 0;
};

SingularSummary summarize(const Matrix& m) {
  SingularSummary s;
  if (m.size() == 0) return s;
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return s;
  s.sigma_max = sv[0];
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > kRankThreshold * sv[0]) {
      ++s.rank;
      s.sigma_min = sv[i];
    }
  }
  return s;
}

Matrix stacked_restriction(const LocalGeometry& g) {
  Index rows = 0;
  for (const auto& m : g.restricted) rows += m.rows();
  const Index cols = g.restricted.empty() ? 0 : g.restricted.front().cols();
  Matrix out(rows, cols);
  Index off = 0;
  for (const auto& m : g.restricted) {
    out.middleRows(off, m.rows()) = m;
    off += m.rows();
  }
  return out;
}

std::optional<double> period_of(const std::optional<Complex>& leading) {
  if (!leading) return std::nullopt;
  const double w = std::abs(std::arg(*leading));
  if (w <= 1e-12) return std::nullopt;
  return std::numbers::pi / w;
}

bool all_polyhedral_without_smooth_terms(const PDProblem& p) {
  if (!p.F.is_zero() || !p.R.is_polyhedral()) return false;
  for (const auto& b : p.blocks)
    if (!b.gstar.is_zero() || !b.J.conjugate_is_polyhedral()) return false;
  return true;
}

}  // namespace

std::string_view to_string(RateBackend b) {
  switch (b) {
    case RateBackend::Analytic: return "analytic";
    case RateBackend::PolyhedralClosedForm: return "polyhedral_closed_form";
    case RateBackend::NumericJacobian: return "numeric_jacobian";
  }
  return "unknown";
}

LocalGeometry local_geometry(const PDProblem& p, const PrimalDualPoint& z, double tol_active) {
  LocalGeometry g;
  g.primal = manifold_at(p.R, z.x, tol_active);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    g.dual.push_back(conjugate_manifold_at(p.blocks[i].J, z.v[i], tol_active));
    g.restricted.push_back(restrict_operator(p.blocks[i].L, g.primal.tangent, g.dual.back().tangent));
  }
  return g;
}

std::optional<Matrix> build_mpd(const PDProblem& p, const PrimalDualPoint& z, double tol_active) {
  p.validate();
  const Index n = p.primal_dim();
  const auto g = local_geometry(p, z, tol_active);
  const Matrix Px = projector_of(g.primal.tangent);

  Vector tilt = p.F.is_zero() ? Vector(Vector::Zero(n)) : p.F.gradient(z.x);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) tilt += p.blocks[i].L.adjoint_apply(z.v[i]);
  const auto hr = riemannian_hessian(p.R, z.x, tilt, tol_active);
  if (!hr) return std::nullopt;
  const Matrix HR = p.gamma_r * Px * (*hr) * Px;
  const Matrix WR = (Matrix::Identity(n, n) + HR).inverse();
  Matrix HbarF = Matrix::Identity(n, n);
  if (!p.F.is_zero()) HbarF -= p.gamma_r * Px * p.F.hessian() * Px;

  const bool multi = p.blocks.size() > 1;
  const double theta = multi ? 1.0 : p.theta;
  const Matrix WRHF = WR * HbarF;

  std::vector<Matrix> WJ, HbarG;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    const Index m = b.L.out_dim();
    const Matrix Pv = projector_of(g.dual[i].tangent);
    const auto hj = conjugate_riemannian_hessian(b.J, z.v[i], tol_active);
    if (!hj) return std::nullopt;
    WJ.push_back((Matrix::Identity(m, m) + b.gamma * Pv * (*hj) * Pv).inverse());
    Matrix hg = Matrix::Identity(m, m);
    if (!b.gstar.is_zero()) hg -= b.gamma * Pv * b.gstar.hessian() * Pv;
    HbarG.push_back(std::move(hg));
  }

  Matrix M = Matrix::Zero(p.total_dim(), p.total_dim());
  M.topLeftCorner(n, n) = WRHF;
  std::vector<Index> offs;
  Index off = n;
  for (const auto& b : p.blocks) {
    offs.push_back(off);
    off += b.L.out_dim();
  }
  for (std::size_t j = 0; j < p.blocks.size(); ++j) {
    const Matrix& Lj = g.restricted[j];
    M.block(0, offs[j], n, Lj.rows()) = -p.gamma_r * WR * Lj.transpose();
  }
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const double gj = p.blocks[i].gamma;
    const Matrix& Li = g.restricted[i];
    const Index mi = Li.rows();
    M.block(offs[i], 0, mi, n) =
        gj * WJ[i] * Li * ((1.0 + theta) * WRHF - theta * Matrix::Identity(n, n));
    // Cross terms couple the duals through the shared extrapolated primal.
    for (std::size_t j = 0; j < p.blocks.size(); ++j) {
      const Matrix& Lj = g.restricted[j];
      Matrix blk = -(1.0 + theta) * gj * p.gamma_r * WJ[i] * Li * WR * Lj.transpose();
      if (i == j) blk += WJ[i] * HbarG[i];
      M.block(offs[i], offs[j], mi, Lj.rows()) = blk;
    }
  }
  return M;
}

SpectralRadius convergent_part_radius(const Matrix& M, double one_cluster_tol) {
  if (M.rows() != M.cols()) throw InvalidInput("convergent_part_radius: matrix must be square");
  SpectralRadius out;
  if (M.size() == 0) return out;
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solver failed");
  const auto ev = es.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  for (const auto& l : out.eigenvalues) {
    if (std::abs(l - 1.0) <= one_cluster_tol) continue;
    const double r = std::abs(l);
    // Prefer the root in the upper half plane among a conjugate pair.
    if (!out.leading || r > out.rho || (r == out.rho && l.imag() > out.leading->imag())) {
      out.rho = r;
      out.leading = l;
    }
  }
  return out;
}

double closed_form_rate(double theta, double gamma_r, double gamma_j, double sigma_min) {
  const double arg = 1.0 - theta * gamma_r * gamma_j * sigma_min * sigma_min;
  if (arg < -1e-14) {
    std::ostringstream msg;
    msg << "closed_form_rate: theta gR gJ sigma_min^2 exceeds 1 (radicand " << arg
        << "); theta is above its admissible bound";
    throw InvalidInput(msg.str());
  }
  return std::sqrt(std::max(arg, 0.0));
}

std::pair<Complex, Complex> polyhedral_eigenpair(double theta, double c) {
  const double a = 2.0 - (1.0 + theta) * c;
  const double disc = a * a - 4.0 * (1.0 - theta * c);
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    return {Complex((a + s) / 2.0, 0.0), Complex((a - s) / 2.0, 0.0)};
  }
  const double s = std::sqrt(-disc);
  return {Complex(a / 2.0, s / 2.0), Complex(a / 2.0, -s / 2.0)};
}

std::vector<Complex> arrow_hurwicz_eigs(double gamma_r, double gamma_j, const std::vector<double>& sigmas) {
  std::vector<Complex> out;
  for (double s : sigmas) {
    const double c = gamma_r * gamma_j * s * s;
    if (!(c < 1.0) || c < 0.0) throw InvalidInput("arrow_hurwicz_eigs: requires gR gJ sigma^2 < 1");
    const double im = std::sqrt(c * (4.0 - c)) / 2.0;
    const Complex a((2.0 - c) / 2.0, im), b((2.0 - c) / 2.0, -im);
    if (std::abs(std::abs(a) - 1.0) > 1e-12 || std::abs(std::abs(b) - 1.0) > 1e-12)
      throw NumericalError("arrow_hurwicz_eigs: root off the unit circle");
    out.push_back(a);
    out.push_back(b);
  }
  return out;
}

double oscillation_cos_omega(double theta, double gamma_r, double gamma_j, double sigma_min) {
  const double c = gamma_r * gamma_j * sigma_min * sigma_min;
  const double m = 1.0 - theta * c;
  if (!(m > 0.0)) throw InvalidInput("oscillation_cos_omega: requires theta c < 1");
  return (2.0 - (1.0 + theta) * c) / (2.0 * std::sqrt(m));
}

std::optional<double> oscillation_period(double theta, double gamma_r, double gamma_j, double sigma_min) {
  const double c = gamma_r * gamma_j * sigma_min * sigma_min;
  const double a = 2.0 - (1.0 + theta) * c;
  const double disc = (1.0 + theta) * (1.0 + theta) * c * c - 4.0 * c;
  if (disc < 0.0) return std::numbers::pi / std::atan2(std::sqrt(-disc), a);
  if (disc == 0.0 && a == 0.0) return 2.0;
  return std::nullopt;
}

AngleReport principal_angles(const SubspaceBasis& T1, const SubspaceBasis& T2, double angle_zero_tol) {
  if (T1.ambient_dim() != T2.ambient_dim()) throw InvalidInput("principal_angles: ambient dimensions differ");
  AngleReport r;
  const SubspaceBasis& a = T1.dim() <= T2.dim() ? T1 : T2;
  const SubspaceBasis& b = T1.dim() <= T2.dim() ? T2 : T1;
  if (a.dim() == 0) return r;
  const Matrix c = a.basis().transpose() * b.basis();
  Eigen::JacobiSVD<Matrix> svd(c);
  const Vector s = svd.singularValues();
  for (Index i = 0; i < s.size(); ++i) r.principal_angles.push_back(std::acos(std::clamp(s[i], 0.0, 1.0)));
  std::sort(r.principal_angles.begin(), r.principal_angles.end());
  for (double t : r.principal_angles)
    if (t <= angle_zero_tol) ++r.intersection_dim;
  if (r.intersection_dim < static_cast<Index>(r.principal_angles.size()))
    r.friedrichs = r.principal_angles[static_cast<std::size_t>(r.intersection_dim)];
  return r;
}

std::optional<double> theta_upper_bound(double gamma_r, double gamma_j, double sigma_max) {
  if (sigma_max < 0.0) throw InvalidInput("theta_upper_bound: sigma_max must be >= 0");
  if (sigma_max == 0.0) return std::nullopt;
  return 1.0 / (gamma_r * gamma_j * sigma_max * sigma_max);
}

Matrix numeric_jacobian(const PDProblem& p, const PrimalDualPoint& z, const NumericJacobianOptions& opts) {
  p.validate();
  const Vector z0 = z.stacked();
  const double scale = std::max(1.0, z0.lpNorm<Eigen::Infinity>());
  const Vector t0 = pd_step(p, z).stacked();
  const double residual = (t0 - z0).lpNorm<Eigen::Infinity>();
  if (residual > opts.stationarity_tol * scale) {
    std::ostringstream msg;
    msg << "numeric_jacobian: point is not stationary (residual " << residual << ")";
    throw InvalidInput(msg.str());
  }
  const double h = opts.h > 0.0 ? opts.h : 1e-6 * (1.0 + z0.norm());
  const Index N = z0.size();
  Matrix J(N, N);
  Vector zp = z0, zm = z0;
  for (Index j = 0; j < N; ++j) {
    zp[j] = z0[j] + h;
    zm[j] = z0[j] - h;
    const Vector tp = pd_step(p, PrimalDualPoint::unstack(p, zp)).stacked();
    const Vector tm = pd_step(p, PrimalDualPoint::unstack(p, zm)).stacked();
    zp[j] = z0[j];
    zm[j] = z0[j];
    const Vector fwd = (tp - t0) / h;
    const Vector bwd = (t0 - tm) / h;
    const double gap = (fwd - bwd).lpNorm<Eigen::Infinity>();
    const double ref = std::max({1.0, fwd.lpNorm<Eigen::Infinity>(), bwd.lpNorm<Eigen::Infinity>()});
    if (gap > 1e-3 * ref) {
      std::ostringstream msg;
      msg << "numeric_jacobian: step map is not differentiable along coordinate " << j
          << " (forward/backward gap " << gap << ")";
      throw NumericalError(msg.str());
    }
    J.col(j) = (tp - tm) / (2.0 * h);
  }
  return J;
}

RatePrediction numeric_jacobian_rate(const PDProblem& p, const PrimalDualPoint& z,
                                     const NumericJacobianOptions& opts) {
  RatePrediction r;
  r.backend = RateBackend::NumericJacobian;
  r.M = numeric_jacobian(p, z, opts);
  auto sr = convergent_part_radius(r.M, opts.one_cluster_tol);
  r.rho = sr.rho;
  r.eigenvalues = std::move(sr.eigenvalues);
  r.period_from_eigs = period_of(sr.leading);
  return r;
}

RatePrediction predict_rate(const PDProblem& p, const PrimalDualPoint& z, double tol_active) {
  p.validate();
  const auto g = local_geometry(p, z, tol_active);
  const auto sv = summarize(stacked_restriction(g));
  const bool single = p.blocks.size() == 1;

  RatePrediction r;
  std::optional<Matrix> M;
  if (single || p.theta == 1.0) M = build_mpd(p, z, tol_active);
  if (M) {
    r.M = std::move(*M);
    auto sr = convergent_part_radius(r.M, kOneClusterTolerance);
    r.rho = sr.rho;
    r.eigenvalues = std::move(sr.eigenvalues);
    r.period_from_eigs = period_of(sr.leading);
    r.backend = single && all_polyhedral_without_smooth_terms(p) ? RateBackend::PolyhedralClosedForm
                                                                  : RateBackend::Analytic;
  } else {
    r = numeric_jacobian_rate(p, z);
  }
  r.sigma_min = sv.sigma_min;
  r.sigma_max = sv.sigma_max;
  r.rank = sv.rank;
  r.primal_tangent_dim = g.primal.dim();
  for (const auto& d : g.dual) r.dual_tangent_dims.push_back(d.dim());
  if (single) {
    const double gj = p.blocks[0].gamma;
    r.theta_max = theta_upper_bound(p.gamma_r, gj, sv.sigma_max);
    if (r.backend == RateBackend::PolyhedralClosedForm && sv.sigma_min) {
      const double c = p.gamma_r * gj * (*sv.sigma_min) * (*sv.sigma_min);
      if (p.theta * c <= 1.0) r.closed_form_rho = closed_form_rate(p.theta, p.gamma_r, gj, *sv.sigma_min);
      r.period = oscillation_period(p.theta, p.gamma_r, gj, *sv.sigma_min);
    }
  }
  return r;
}

}  // namespace pdsplit
