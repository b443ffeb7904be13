#include "pdsplit/generators.hpp"
#include "pdsplit/ratepred.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <numbers>
#include <random>

using namespace pdsplit;

namespace {

std::mt19937_64 rng(5);

Vector randn(Index n) {
  std::normal_distribution<double> d;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

Matrix randn(Index r, Index c) {
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j) m.col(j) = randn(r);
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

PrimalDualPoint zeros(const PDProblem& p) {
  PrimalDualPoint z;
  z.x = Vector::Zero(p.primal_dim());
  for (const auto& b : p.blocks) z.v.push_back(Vector::Zero(b.L.out_dim()));
  return z;
}

// The polyhedral block matrix written out from L_bar.
Matrix polyhedral_block(const Matrix& Lb, double gr, double gj, double theta) {
  const Index m = Lb.rows(), n = Lb.cols();
  Matrix M(n + m, n + m);
  M.topLeftCorner(n, n).setIdentity();
  M.topRightCorner(n, m) = -gr * Lb.transpose();
  M.bottomLeftCorner(m, n) = gj * Lb;
  M.bottomRightCorner(m, m) = Matrix::Identity(m, m) - (1.0 + theta) * gj * gr * Lb * Lb.transpose();
  return M;
}

Eigen::VectorXcd eigs(const Matrix& M) { return Eigen::EigenSolver<Matrix>(M, false).eigenvalues(); }

// Noiseless basis pursuit min ||x||_1 s.t. K x = b, solved to stationarity.
struct Instance {
  PDProblem p;
  PrimalDualPoint z;
  Matrix K;
};

// Steps gR = gJ = f / ||K||.
Instance basis_pursuit(Index m, Index n, double f, double theta) {
  Instance out;
  out.K = randn(m, n);
  const double gr = f / Eigen::JacobiSVD<Matrix>(out.K).singularValues()[0], gj = gr;
  Vector x = Vector::Zero(n);
  x[1] = 1.5;
  x[4] = -2.0;
  x[7] = 0.7;
  out.p.R = ConvexFunctionSpec::l1(n);
  out.p.F = SmoothFunctionSpec::zero(n);
  out.p.blocks.push_back(DualBlock{ConvexFunctionSpec::indicator_point(out.K * x), SmoothFunctionSpec::zero(m),
                                   LinearOperator::dense(out.K), gj});
  out.p.gamma_r = gr;
  out.p.theta = theta;
  StoppingRule stop;
  stop.max_iter = 200000;
  stop.step_tol = 1e-15;
  stop.record_iterates = false;
  out.z = pd_solve(out.p, zeros(out.p), stop).last;
  return out;
}

Matrix support_projector(const Vector& x) {
  Matrix P = Matrix::Zero(x.size(), x.size());
  const double scale = x.lpNorm<Eigen::Infinity>();
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > 1e-8 * scale) P(i, i) = 1.0;
  return P;
}

}  // namespace

TEST_CASE("build_mpd specializes to the polyhedral block form") {
  const Index m = 12, n = 24;
  for (double theta : {0.5, 1.0}) {
    auto inst = basis_pursuit(m, n, 0.9, theta);
    const auto M = build_mpd(inst.p, inst.z);
    REQUIRE(M);
    // Point indicator: J* is linear, so the dual tangent is the whole space.
    const Matrix Lb = inst.K * support_projector(inst.z.x);
    const Matrix want = polyhedral_block(Lb, inst.p.gamma_r, inst.p.blocks[0].gamma, theta);
    CHECK((*M - want).cwiseAbs().maxCoeff() <= 1e-14);
    const auto g = local_geometry(inst.p, inst.z);
    CHECK(g.primal.dim() == 3);
    CHECK(g.dual[0].dim() == m);
  }
}

TEST_CASE("zero-dimensional tangent spaces give the identity") {
  PDProblem p;
  p.R = ConvexFunctionSpec::l1(2);
  p.F = SmoothFunctionSpec::zero(2);
  p.blocks.push_back(
      DualBlock{ConvexFunctionSpec::l1(2), SmoothFunctionSpec::zero(2), LinearOperator::identity(2), 0.5});
  p.gamma_r = 0.5;
  // x = 0 with v at a vertex of the dual box.
  PrimalDualPoint z;
  z.x = Vector::Zero(2);
  z.v = {vec({1, -1})};
  const auto g = local_geometry(p, z);
  CHECK(g.primal.dim() == 0);
  CHECK(g.dual[0].dim() == 0);
  CHECK(g.restricted[0].norm() == 0.0);
  const auto M = build_mpd(p, z);
  REQUIRE(M);
  CHECK(*M == Matrix::Identity(4, 4));
  CHECK(convergent_part_radius(*M).rho == 0.0);
}

TEST_CASE("convergent_part_radius examples") {
  CHECK(convergent_part_radius(Matrix::Identity(5, 5)).rho == 0.0);

  const Matrix M = polyhedral_block(Matrix::Constant(1, 1, 0.6), 1.0, 1.0, 1.0);
  const auto r = convergent_part_radius(M);
  CHECK(r.rho == doctest::Approx(0.8).epsilon(1e-14));
  REQUIRE(r.leading);
  CHECK(r.leading->real() == doctest::Approx(0.64).epsilon(1e-14));
  CHECK(r.leading->imag() == doctest::Approx(0.48).epsilon(1e-14));
  // Companion-matrix oracle: roots of l^2 - (2 - 2c) l + (1 - c), c = 0.36.
  Matrix comp(2, 2);
  comp << 0, -(1 - 0.36), 1, 2 - 2 * 0.36;
  for (const auto& l : eigs(comp)) CHECK(std::abs(std::abs(l) - r.rho) <= 1e-14);

  // theta = 0: every non-unit eigenvalue lies on the unit circle.
  const Matrix Lb = randn(4, 6) * 0.2;
  const auto r0 = convergent_part_radius(polyhedral_block(Lb, 1.0, 1.0, 0.0));
  int off = 0;
  for (const auto& l : r0.eigenvalues)
    if (std::abs(l - 1.0) > kOneClusterTolerance) {
      ++off;
      CHECK(std::abs(std::abs(l) - 1.0) <= 1e-10);
    }
  CHECK(off == 8);
  REQUIRE_THROWS_AS(convergent_part_radius(Matrix::Zero(2, 3)), InvalidInput);
}

TEST_CASE("closed_form_rate examples and properties") {
  CHECK(closed_form_rate(1.0, 1.0, 1.0, 0.6) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(closed_form_rate(0.0, 0.7, 0.3, 0.9) == 1.0);
  CHECK(closed_form_rate(1.0, 1.0, 1.0, 1.0) == 0.0);
  REQUIRE_THROWS_AS(closed_form_rate(2.0, 1.0, 1.0, 1.0), InvalidInput);

  // Strictly decreasing in theta and in gR gJ on grids.
  const double smin = 0.4, smax = 1.0;
  for (double c = 0.1; c < 0.95; c += 0.1) {
    const double g = std::sqrt(c);
    double prev = 2.0;
    for (double theta = 0.05; theta <= 1.0; theta += 0.05) {
      const double r = closed_form_rate(theta, g, g, smin);
      CHECK(r < prev);
      prev = r;
      // Lower-bound chain when gR gJ smax^2 < 1.
      CHECK(r > std::sqrt(1.0 - theta * (smin / smax) * (smin / smax)));
    }
  }
  double prev = 2.0;
  for (double g = 0.1; g < 1.0; g += 0.05) {
    const double r = closed_form_rate(1.0, g, g, smin);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("arrow_hurwicz_eigs") {
  const auto e = arrow_hurwicz_eigs(1.0, 0.5, {1.0});
  REQUIRE(e.size() == 2);
  for (const auto& l : e) {
    CHECK(l.real() == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(std::abs(std::abs(l.imag()) - std::sqrt(0.4375)) <= 1e-15);
  }
  for (const auto& l : arrow_hurwicz_eigs(1.0, 1.0, {1e-9})) CHECK(std::abs(l - 1.0) <= 1e-8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> sig;
  for (int i = 0; i < 30; ++i) sig.push_back(0.999 * u(rng));
  for (const auto& l : arrow_hurwicz_eigs(1.0, 1.0, sig)) CHECK(std::abs(std::abs(l) - 1.0) <= 1e-12);
  REQUIRE_THROWS_AS(arrow_hurwicz_eigs(1.0, 1.0, {1.0}), InvalidInput);
}

TEST_CASE("oscillation period") {
  // theta = 1: cos(omega) = sqrt(1 - c), so c = sin^2(pi/12) gives period 12.
  const double s = std::sin(std::numbers::pi / 12);
  const auto p12 = oscillation_period(1.0, 1.0, 1.0, s);
  REQUIRE(p12);
  CHECK(*p12 == doctest::Approx(12.0).epsilon(1e-12));
  const auto p2 = oscillation_period(1.0, 1.0, 1.0, 1.0);
  REQUIRE(p2);
  CHECK(*p2 == doctest::Approx(2.0).epsilon(1e-12));
  // Real leading eigenvalue: (1+theta)^2 c >= 4.
  CHECK_FALSE(oscillation_period(2.0, 1.0, 1.0, std::sqrt(0.45)));

  // Formula against the argument of an eigenvalue of the 2 x 2 block.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 50) {
    const double theta = 0.05 + 0.95 * u(rng), c = 0.01 + 0.98 * u(rng);
    if ((1 + theta) * (1 + theta) * c >= 4.0) continue;
    const auto per = oscillation_period(theta, 1.0, 1.0, std::sqrt(c));
    REQUIRE(per);
    double arg = 0.0;
    for (const auto& l : eigs(polyhedral_block(Matrix::Constant(1, 1, std::sqrt(c)), 1.0, 1.0, theta)))
      arg = std::max(arg, std::arg(l));
    CHECK(std::abs(std::numbers::pi / arg - *per) <= 1e-9 * *per);
    CHECK(std::abs(std::acos(oscillation_cos_omega(theta, 1.0, 1.0, std::sqrt(c))) - arg) <= 1e-9);
    ++checked;
  }
}

TEST_CASE("polyhedral_eigenpair solves its characteristic equation") {
  for (double theta : {0.3, 1.0, 1.5})
    for (double c : {0.1, 0.5, 0.9}) {
      const auto [a, b] = polyhedral_eigenpair(theta, c);
      for (const auto& l : {a, b}) CHECK(std::abs(l * l - (2 - (1 + theta) * c) * l + (1 - theta * c)) <= 1e-14);
    }
}

TEST_CASE("principal angles") {
  Matrix e1 = Matrix::Zero(2, 1), e2 = Matrix::Zero(2, 1), a = Matrix::Zero(2, 1);
  e1(0, 0) = 1;
  e2(1, 0) = 1;
  a << std::cos(0.3), std::sin(0.3);
  const auto T1 = SubspaceBasis::span_of(e1, 2);
  auto r = principal_angles(T1, T1);
  REQUIRE(r.principal_angles.size() == 1);
  CHECK(r.principal_angles[0] == doctest::Approx(0.0));
  CHECK(r.intersection_dim == 1);
  CHECK_FALSE(r.friedrichs);

  r = principal_angles(T1, SubspaceBasis::span_of(e2, 2));
  CHECK(r.principal_angles[0] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));
  REQUIRE(r.friedrichs);
  CHECK(*r.friedrichs == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));

  r = principal_angles(T1, SubspaceBasis::span_of(a, 2));
  CHECK(r.principal_angles[0] == doctest::Approx(0.3).epsilon(1e-14));

  // A shared direction plus random parts: d = 1 and the Friedrichs angle is the second.
  Matrix b1 = randn(7, 3), b2 = randn(7, 4);
  b2.col(0) = b1.col(0);
  r = principal_angles(SubspaceBasis::span_of(b1, 7), SubspaceBasis::span_of(b2, 7));
  CHECK(r.intersection_dim == 1);
  REQUIRE(r.friedrichs);
  CHECK(*r.friedrichs == r.principal_angles[1]);
  CHECK(std::is_sorted(r.principal_angles.begin(), r.principal_angles.end()));
  CHECK(principal_angles(SubspaceBasis::coordinates(2, {}), T1.orthogonal_complement()).principal_angles.empty());
}

TEST_CASE("restricted identity angle and the Douglas-Rachford rate") {
  // L = Id: sigma_min of the restricted identity is the cosine of the largest
  // principal angle below pi/2, and the rate is at least the sine of it.
  for (int t = 0; t < 20; ++t) {
    const auto T1 = SubspaceBasis::span_of(randn(8, 3), 8), T2 = SubspaceBasis::span_of(randn(8, 4), 8);
    const auto ang = principal_angles(T1, T2);
    double w = 0.0;
    for (double a : ang.principal_angles)
      if (a < std::numbers::pi / 2 - 1e-9) w = std::max(w, a);
    const auto sv = restricted_singular_values(LinearOperator::identity(8), T1, T2);
    REQUIRE(sv.sigma_min_nonzero);
    CHECK(std::abs(*sv.sigma_min_nonzero - std::cos(w)) <= 1e-10);

    const double gr = 0.5 + 0.05 * t, gj = 1.0 / gr * (t % 2 == 0 ? 1.0 : 0.8);
    const Matrix Lb = restrict_operator(LinearOperator::identity(8), T1, T2);
    const double rho = convergent_part_radius(polyhedral_block(Lb, gr, gj, 1.0)).rho;
    CHECK(std::abs(rho - std::sqrt(1.0 - gj * gr * std::cos(w) * std::cos(w))) <= 1e-10);
    CHECK(rho >= std::sin(w) - 1e-12);
  }
}

TEST_CASE("theta_upper_bound") {
  CHECK(*theta_upper_bound(1.0, 0.5, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(*theta_upper_bound(1.0, 1.0, 1.0) == 1.0);
  CHECK_FALSE(theta_upper_bound(1.0, 1.0, 0.0));
  // Above the bound the sigma_max pair turns real.
  for (double c : {0.2, 0.5, 0.9}) {
    const double bound = *theta_upper_bound(1.0, 1.0, std::sqrt(c));
    for (double theta : {bound * 1.001, bound * 1.5}) {
      const auto [a, b] = polyhedral_eigenpair(theta, c);
      CHECK(a.imag() == 0.0);
      CHECK(b.imag() == 0.0);
      CHECK((1 + theta) * (1 + theta) * c * c - 4 * c >= 0.0);
    }
  }
}

TEST_CASE("predict_rate on a polyhedral instance") {
  const Index m = 10, n = 20;
  for (double theta : {0.6, 1.0}) {
    auto inst = basis_pursuit(m, n, 0.8, theta);
    const double c = inst.p.gamma_r * inst.p.blocks[0].gamma;
    const auto pr = predict_rate(inst.p, inst.z);
    CHECK(pr.backend == RateBackend::PolyhedralClosedForm);
    REQUIRE(pr.closed_form_rho);
    REQUIRE(pr.sigma_min);
    CHECK(std::abs(pr.rho - *pr.closed_form_rho) <= 1e-10);
    CHECK(*pr.sigma_min <= pr.sigma_max);
    REQUIRE(pr.theta_max);
    CHECK(*pr.theta_max == doctest::Approx(1.0 / (c * pr.sigma_max * pr.sigma_max)));
    // Independent restricted singular values: columns of K on the support.
    std::vector<Index> S;
    for (Index i = 0; i < n; ++i)
      if (support_projector(inst.z.x)(i, i) == 1.0) S.push_back(i);
    Matrix KS(m, static_cast<Index>(S.size()));
    for (std::size_t j = 0; j < S.size(); ++j) KS.col(static_cast<Index>(j)) = inst.K.col(S[j]);
    const Vector sv = Eigen::JacobiSVD<Matrix>(KS).singularValues();
    CHECK(std::abs(*pr.sigma_min - sv[sv.size() - 1]) <= 1e-10);
    CHECK(std::abs(pr.rho - std::sqrt(1.0 - theta * c * sv[sv.size() - 1] * sv[sv.size() - 1])) <= 1e-10);

    const auto num = numeric_jacobian_rate(inst.p, inst.z);
    CHECK(num.backend == RateBackend::NumericJacobian);
    CHECK(std::abs(num.rho - pr.rho) <= 1e-6);
    if (theta == 1.0 && pr.period) {
      REQUIRE(pr.period_from_eigs);
      CHECK(std::abs(*pr.period - *pr.period_from_eigs) <= 1e-9 * *pr.period);
    }

    PrimalDualPoint off = inst.z;
    off.x[0] += 1e-3;
    REQUIRE_THROWS_AS(numeric_jacobian(inst.p, off), InvalidInput);
  }
}

TEST_CASE("numeric Jacobian of forward-backward") {
  const Index m = 15, n = 30;
  const Matrix K = randn(m, n);
  PDProblem p;
  p.R = ConvexFunctionSpec::l1(n, 3.0);
  p.F = SmoothFunctionSpec::quadratic(LinearOperator::dense(K), randn(m) * 3.0);
  p.gamma_r = 1.2 * p.F.beta();
  StoppingRule stop;
  stop.max_iter = 500000;
  stop.step_tol = 1e-15;
  stop.record_iterates = false;
  PrimalDualPoint z;
  z.x = fb_solve(p.R, p.F, p.gamma_r, Vector::Zero(n), stop).last.x;
  const auto num = numeric_jacobian_rate(p, z);

  // Analytic FB matrix on the support: Id - gamma K_S^T K_S.
  std::vector<Index> S;
  for (Index i = 0; i < n; ++i)
    if (support_projector(z.x)(i, i) == 1.0) S.push_back(i);
  REQUIRE_FALSE(S.empty());
  Matrix KS(m, static_cast<Index>(S.size()));
  for (std::size_t j = 0; j < S.size(); ++j) KS.col(static_cast<Index>(j)) = K.col(S[j]);
  const Matrix MFB =
      Matrix::Identity(KS.cols(), KS.cols()) - p.gamma_r * KS.transpose() * KS;
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(MFB).eigenvalues();
  double want = 0.0;
  for (Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i] - 1.0) > kNumericOneClusterTolerance) want = std::max(want, std::abs(ev[i]));
  CHECK(std::abs(num.rho - want) <= 1e-6);

  const auto an = predict_rate(p, z);
  CHECK(std::abs(an.rho - want) <= 1e-10);
}

TEST_CASE("multi-block linearization matches the finite-difference Jacobian") {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::TvGroupRegression;
  cfg.multi_block = true;
  cfg.n = 32;
  cfg.m = 24;
  const auto g = generate_problem(cfg);
  REQUIRE(g.problem.blocks.size() == 2);
  StoppingRule stop;
  stop.max_iter = 20 * g.max_iter;
  stop.step_tol = 1e-15;
  stop.record_iterates = false;
  const auto z = pd_solve(g.problem, zeros(g.problem), stop).last;
  const auto an = predict_rate(g.problem, z);
  CHECK(an.backend == RateBackend::Analytic);
  const auto num = numeric_jacobian_rate(g.problem, z);
  CHECK(std::abs(an.rho - num.rho) <= 1e-6);
  CHECK(an.rho > 0.5);
}
