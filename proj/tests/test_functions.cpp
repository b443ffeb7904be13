#include "oracles.hpp"
#include "pdsplit/functions.hpp"

#include <doctest.h>

#include <random>

using namespace pdsplit;

namespace {

std::mt19937_64 rng(7);

Vector randn(Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double norm_value(const ConvexFunctionSpec& f, const Vector& x) {
  switch (f.kind) {
    case FunctionKind::L1: return f.scale * x.lpNorm<1>();
    case FunctionKind::LInf: return f.scale * x.lpNorm<Eigen::Infinity>();
    case FunctionKind::Nuclear: {
      const Matrix X = Eigen::Map<const Matrix>(x.data(), f.rows, f.cols);
      return f.scale * Eigen::JacobiSVD<Matrix>(X).singularValues().sum();
    }
    default: return 0.0;
  }
}

}  // namespace

TEST_CASE("prox examples") {
  // Per-coordinate grid argmin of 1/2 (z - x_i)^2 + |z|.
  const Vector x = vec({2, -0.5, 0});
  Vector grid_min(3);
  for (Index i = 0; i < 3; ++i) {
    double best = 1e300, arg = 0;
    for (int k = -40000; k <= 40000; ++k) {
      const double z = k * 1e-4;
      const double obj = 0.5 * (z - x[i]) * (z - x[i]) + std::abs(z);
      if (obj < best) best = obj, arg = z;
    }
    grid_min[i] = arg;
  }
  const Vector p = prox(ConvexFunctionSpec::l1(3), 1.0, x);
  CHECK((p - grid_min).norm() <= 1e-4);
  CHECK((p - vec({1, 0, 0})).norm() <= 1e-15);

  CHECK(prox(ConvexFunctionSpec::zero(2), 3.0, vec({3, 4})) == vec({3, 4}));
  CHECK(prox(ConvexFunctionSpec::indicator_linf_ball(Vector::Zero(2), 1.0), 7.0, vec({2, -0.3})) == vec({1, -0.3}));

  // diag(3, 0.5) -> diag(2, 0); the output must beat random perturbations.
  const auto nuc = ConvexFunctionSpec::nuclear(2, 2);
  const Vector X = vec({3, 0, 0, 0.5});
  const Vector P = prox(nuc, 1.0, X);
  CHECK((P - vec({2, 0, 0, 0})).norm() <= 1e-12);
  const double obj = 0.5 * (P - X).squaredNorm() + norm_value(nuc, P);
  for (int t = 0; t < 200; ++t) {
    const Vector Q = P + randn(4, 1e-3);
    CHECK(0.5 * (Q - X).squaredNorm() + norm_value(nuc, Q) >= obj - 1e-14);
  }
}

TEST_CASE("prox_conjugate examples") {
  CHECK((prox_conjugate(ConvexFunctionSpec::l1(2), 2.0, vec({3, -0.4})) - vec({1, -0.4})).norm() <= 1e-15);
  CHECK(prox_conjugate(ConvexFunctionSpec::zero(2), 0.7, vec({5, 5})).norm() == 0.0);
  CHECK((prox_conjugate(ConvexFunctionSpec::indicator_point(vec({1, 0})), 1.0, vec({2, 2})) - vec({1, 2})).norm() <=
        1e-15);
}

TEST_CASE("Moreau decomposition against closed-form conjugate proxes") {
  for (const auto& f : oracle::all_kinds(rng)) {
    CAPTURE(to_string(f.kind));
    for (int t = 0; t < 200; ++t) {
      const double gamma = uniform(0.1, 10.0);
      const Vector x = randn(f.dim, 3.0);
      const Vector rhs = prox(f, gamma, x) + gamma * oracle::conjugate_prox(f, 1.0 / gamma, x / gamma);
      CHECK((x - rhs).norm() <= 1e-10 * std::max(1.0, x.norm()));
      const Vector pc = prox_conjugate(f, gamma, x);
      CHECK((pc - oracle::conjugate_prox(f, gamma, x)).norm() <= 1e-10 * std::max(1.0, x.norm()));
    }
  }
}

TEST_CASE("prox is firmly nonexpansive") {
  for (const auto& f : oracle::all_kinds(rng)) {
    CAPTURE(to_string(f.kind));
    for (int t = 0; t < 200; ++t) {
      const double gamma = uniform(0.1, 10.0);
      const Vector x = randn(f.dim, 3.0), y = randn(f.dim, 3.0);
      const Vector d = prox(f, gamma, x) - prox(f, gamma, y);
      CHECK(d.squaredNorm() <= d.dot(x - y) + 1e-12 * (1.0 + (x - y).squaredNorm()));
    }
  }
}

TEST_CASE("scale consistency for the norm kinds") {
  for (const auto& f : oracle::all_kinds(rng)) {
    if (f.kind != FunctionKind::L1 && f.kind != FunctionKind::LInf && f.kind != FunctionKind::GroupL12 &&
        f.kind != FunctionKind::Nuclear)
      continue;
    auto unit = f;
    unit.scale = 1.0;
    for (int t = 0; t < 50; ++t) {
      const double gamma = uniform(0.1, 10.0);
      const Vector x = randn(f.dim, 3.0);
      CHECK((prox(f, gamma, x) - prox(unit, f.scale * gamma, x)).norm() <= 1e-12 * std::max(1.0, x.norm()));
    }
  }
}

TEST_CASE("specs validate their payloads") {
  REQUIRE_THROWS_AS(ConvexFunctionSpec::group_l12(4, {{0, 1}, {1, 2, 3}}).validate(), InvalidInput);
  REQUIRE_THROWS_AS(ConvexFunctionSpec::group_l12(4, {{0, 1}, {3}}).validate(), InvalidInput);
  REQUIRE_THROWS_AS(ConvexFunctionSpec::l1(3, -1.0).validate(), InvalidInput);
  REQUIRE_THROWS_AS(ConvexFunctionSpec::indicator_l1_ball(Vector::Zero(3), -0.1).validate(), InvalidInput);
  REQUIRE_THROWS_AS(prox(ConvexFunctionSpec::l1(3), 0.0, Vector::Zero(3)), InvalidInput);
  REQUIRE_THROWS_AS(prox(ConvexFunctionSpec::l1(3), 1.0, Vector::Zero(4)), InvalidInput);
  CHECK(function_kind_from_string("group_l12") == FunctionKind::GroupL12);
  REQUIRE_THROWS_AS(function_kind_from_string("l3"), InvalidInput);
}

TEST_CASE("smooth function gradient matches central differences") {
  Matrix K(3, 4);
  K << 1, 2, 0, -1, 0, 1, 3, 0.5, -2, 0, 1, 1;
  const auto F = SmoothFunctionSpec::quadratic(LinearOperator::dense(K), vec({1, -1, 2}));
  const Vector x = randn(4);
  const Vector g = F.gradient(x);
  for (Index i = 0; i < 4; ++i) {
    const double h = 1e-5;
    Vector e = Vector::Zero(4);
    e[i] = h;
    const double fd = (F.value(x + e) - F.value(x - e)) / (2 * h);
    CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
  }
  const double nk = Eigen::JacobiSVD<Matrix>(K).singularValues()[0];
  CHECK(F.beta() == doctest::Approx(1.0 / (nk * nk)).epsilon(1e-12));
  CHECK((F.hessian() - K.transpose() * K).norm() <= 1e-12);
  CHECK(std::isinf(SmoothFunctionSpec::zero(4).beta()));
}

TEST_CASE("nd_certificate examples") {
  const auto l1 = ConvexFunctionSpec::l1(2);
  auto c = nd_certificate(l1, vec({1, 0}), vec({1, 0.3}), 1e-9);
  CHECK(c.holds);
  CHECK(c.margin == doctest::Approx(0.7).epsilon(1e-14));
  c = nd_certificate(l1, vec({1, 0}), vec({1, 1}), 1e-9);
  CHECK_FALSE(c.holds);
  CHECK(c.margin == 0.0);
  const auto g = ConvexFunctionSpec::group_l12(3, {{0, 1}, {2}});
  c = nd_certificate(g, vec({3, 4, 0}), vec({0.6, 0.8, 0.9}), 1e-9);
  CHECK(c.holds);
  CHECK(c.margin == doctest::Approx(0.1).epsilon(1e-12));
  // Off the subdifferential in the equality part.
  c = nd_certificate(l1, vec({1, 0}), vec({0.5, 0}), 1e-9);
  CHECK_FALSE(c.holds);
  CHECK(c.margin < 0.0);
  CHECK(in_subdifferential(l1, vec({1, 0}), vec({1, 1}), 1e-9));
  CHECK_FALSE(in_subdifferential(l1, vec({1, 0}), vec({1, 1.1}), 1e-9));
}

TEST_CASE("manifold_at examples") {
  const auto s = manifold_at(ConvexFunctionSpec::l1(4), vec({0, 2, 0, -1}));
  CHECK(s.label.family == "support");
  CHECK(s.label.active == std::vector<Index>{1, 3});
  CHECK(s.dim() == 2);
  const std::vector<Index> sup{1, 3};
  CHECK((s.tangent.projector() - SubspaceBasis::coordinates(4, sup).projector()).norm() <= 1e-14);

  // {z : z_I in R sign(x_I)} for x = (3, -3, 1): span of (1, -1, 0) and e3.
  const auto li = manifold_at(ConvexFunctionSpec::linf(3), vec({3, -3, 1}));
  CHECK(li.label.active == std::vector<Index>{0, 1});
  CHECK(li.dim() == 2);
  Matrix span(3, 2);
  span << 1, 0, -1, 0, 0, 1;
  CHECK((li.tangent.projector() - SubspaceBasis::span_of(span, 3).projector()).norm() <= 1e-12);

  const auto nu = manifold_at(ConvexFunctionSpec::nuclear(3, 3), vec({2, 0, 0, 0, 1, 0, 0, 0, 0}));
  CHECK(nu.label.rank == 2);
  CHECK(nu.dim() == 2 * (3 + 3 - 2));
  CHECK(nu.U.cols() == 2);
  CHECK(std::abs(std::abs(nu.U(0, 0)) - 1.0) <= 1e-12);
  CHECK(std::abs(std::abs(nu.V(1, 1)) - 1.0) <= 1e-12);

  for (const auto& f : oracle::all_kinds(rng)) {
    const Vector x = randn(f.dim);
    const auto d = manifold_at(f, x);
    const Matrix P = d.tangent.projector();
    CHECK((P * P - P).norm() <= 1e-12);
    CHECK((P - P.transpose()).norm() <= 1e-12);
    CHECK(manifold_label(f, x) == d.label);
    CHECK(conjugate_manifold_label(f, x) == conjugate_manifold_at(f, x).label);
  }
}

TEST_CASE("conjugate manifolds of the polyhedral pairs") {
  const auto d = conjugate_manifold_at(ConvexFunctionSpec::l1(3), vec({1, 0.3, -1}));
  CHECK(d.label.active == std::vector<Index>{0, 2});
  CHECK(d.dim() == 1);
  const auto z = conjugate_manifold_at(ConvexFunctionSpec::zero(3), vec({0, 0, 0}));
  CHECK(z.dim() == 0);
  const auto pt = conjugate_manifold_at(ConvexFunctionSpec::indicator_point(vec({1, 2})), vec({5, -1}));
  CHECK(pt.dim() == 2);
}

TEST_CASE("labels hash deterministically and print compactly") {
  const auto a = manifold_label(ConvexFunctionSpec::l1(4), vec({0, 2, 0, -1}));
  const auto b = manifold_label(ConvexFunctionSpec::l1(4), vec({0, 5, 0, -3}));
  CHECK(a == b);
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != manifold_label(ConvexFunctionSpec::l1(4), vec({1, 2, 0, -1})).hash());
  CHECK(manifold_label(ConvexFunctionSpec::nuclear(3, 3), vec({2, 0, 0, 0, 1, 0, 0, 0, 0})).to_string() == "rank=2");
}

TEST_CASE("Riemannian Hessians") {
  const Vector x = randn(5);
  const auto h = riemannian_hessian(ConvexFunctionSpec::l1(5), x, Vector::Zero(5));
  REQUIRE(h);
  CHECK(h->norm() == 0.0);

  const auto g = ConvexFunctionSpec::group_l12(2, {{0, 1}});
  const auto hg = riemannian_hessian(g, vec({3, 4}), Vector::Zero(2));
  REQUIRE(hg);
  Matrix expect(2, 2);
  expect << 0.64, -0.48, -0.48, 0.36;
  expect /= 5.0;
  CHECK((*hg - expect).norm() <= 1e-14);

  // Inactive blocks carry zero rows and columns; active ones match central
  // differences of the gradient mu x_b / ||x_b||, projected to the tangent.
  const auto g3 = ConvexFunctionSpec::group_l12(5, {{0, 1}, {2, 3, 4}}, 1.7);
  const Vector x3 = vec({0, 0, 1.0, -2.0, 0.5});
  const auto h3 = riemannian_hessian(g3, x3, Vector::Zero(5));
  REQUIRE(h3);
  CHECK(h3->topRows(2).norm() == 0.0);
  CHECK(h3->leftCols(2).norm() == 0.0);
  const auto grad = [&](const Vector& y) {
    Vector out = Vector::Zero(5);
    out.tail(3) = 1.7 * y.tail(3) / y.tail(3).norm();
    return out;
  };
  Matrix fd = Matrix::Zero(5, 5);
  for (Index j = 2; j < 5; ++j) {
    Vector e = Vector::Zero(5);
    e[j] = 1e-6;
    fd.col(j) = (grad(x3 + e) - grad(x3 - e)) / 2e-6;
  }
  const Matrix P = manifold_at(g3, x3).tangent.projector();
  CHECK((P * fd * P - *h3).norm() <= 1e-5);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(*h3);
  CHECK(es.eigenvalues().minCoeff() >= -1e-14);

  CHECK_FALSE(riemannian_hessian(ConvexFunctionSpec::nuclear(2, 2), vec({1, 0, 0, 1}), Vector::Zero(4)));
  CHECK_FALSE(conjugate_riemannian_hessian(g3, Vector::Zero(5)));
  CHECK(conjugate_riemannian_hessian(ConvexFunctionSpec::l1(3), vec({1, 0, -1})));
}

TEST_CASE("l1 ball projection") {
  for (int t = 0; t < 100; ++t) {
    const Vector y = randn(9, 2.0);
    const double r = uniform(0.1, 5.0);
    CHECK((project_l1_ball(y, r) - oracle::project_l1(y, r)).norm() <= 1e-12);
  }
  CHECK(l1_ball_threshold(vec({0.1, -0.2}), 1.0) == 0.0);
  CHECK(l1_ball_threshold(vec({3, -1}), 2.0) == doctest::Approx(1.0).epsilon(1e-14));
}
