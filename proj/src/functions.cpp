#include "pdsplit/functions.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pdsplit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_dim(const ConvexFunctionSpec& f, const Vector& x, const char* what) {
  if (x.size() != f.dim) {
    std::ostringstream msg;
    msg << what << ": expected vector of length " << f.dim << ", got " << x.size();
    throw InvalidInput(msg.str());
  }
}

Vector soft_threshold(const Vector& x, double t) {
  return x.unaryExpr([t](double v) { return sign_of(v) * std::max(std::abs(v) - t, 0.0); });
}

Vector clamp(const Vector& x, double t) {
  return x.unaryExpr([t](double v) { return std::clamp(v, -t, t); });
}

std::vector<Index> support_of(const Vector& x, double tol_active) {
  std::vector<Index> s;
  const double scale = x.size() > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return s;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > tol_active * scale) s.push_back(i);
  return s;
}

std::vector<int> signs_on(const Vector& x, const std::vector<Index>& idx) {
  std::vector<int> s;
  s.reserve(idx.size());
  for (Index i : idx) s.push_back(static_cast<int>(sign_of(x[i])));
  return s;
}

std::vector<Index> complement_of(const std::vector<Index>& idx, Index n) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (Index i : idx) in[static_cast<std::size_t>(i)] = true;
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

Eigen::Map<const Matrix> as_matrix(const ConvexFunctionSpec& f, const Vector& x) {
  return Eigen::Map<const Matrix>(x.data(), f.rows, f.cols);
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

// Coordinates on `idx` with the direction `dir` (supported on idx) removed.
SubspaceBasis coordinates_orthogonal_to(Index n, const std::vector<Index>& idx, const Vector& dir) {
  if (idx.size() <= 1) return SubspaceBasis::zero(n);
  const Index k = static_cast<Index>(idx.size());
  Vector d(k);
  for (Index j = 0; j < k; ++j) d[j] = dir[idx[static_cast<std::size_t>(j)]];
  d.normalize();
  const Matrix local = Matrix::Identity(k, k) - d * d.transpose();
  Matrix spanning = Matrix::Zero(n, k);
  for (Index j = 0; j < k; ++j) spanning.row(idx[static_cast<std::size_t>(j)]) = local.row(j);
  return SubspaceBasis::span_of(spanning, n);
}

// ---- manifolds of the individual geometric pieces -------------------------

ManifoldDescriptor support_manifold(const Vector& x, double tol_active, bool tangent = true) {
  const Index n = x.size();
  ManifoldDescriptor d;
  d.label.family = "support";
  d.label.active = support_of(x, tol_active);
  if (tangent) d.tangent = SubspaceBasis::coordinates(n, d.label.active);
  return d;
}

ManifoldDescriptor linf_norm_manifold(const Vector& x, double tol_active, bool tangent = true) {
  const Index n = x.size();
  ManifoldDescriptor d;
  d.label.family = "linf_face";
  const double m = n > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
  if (m == 0.0) {
    d.label.active.resize(static_cast<std::size_t>(n));
    std::iota(d.label.active.begin(), d.label.active.end(), Index{0});
    d.label.signs.assign(static_cast<std::size_t>(n), 0);
    if (tangent) d.tangent = SubspaceBasis::zero(n);
    return d;
  }
  for (Index i = 0; i < n; ++i)
    if (std::abs(x[i]) >= m * (1.0 - tol_active)) d.label.active.push_back(i);
  d.label.signs = signs_on(x, d.label.active);
  const auto off = complement_of(d.label.active, n);
  Matrix b = Matrix::Zero(n, static_cast<Index>(off.size()) + 1);
  const double norm = std::sqrt(static_cast<double>(d.label.active.size()));
  for (std::size_t j = 0; j < d.label.active.size(); ++j)
    b(d.label.active[j], 0) = d.label.signs[j] / norm;
  for (std::size_t j = 0; j < off.size(); ++j) b(off[j], static_cast<Index>(j) + 1) = 1.0;
  if (tangent) d.tangent = SubspaceBasis::from_orthonormal(std::move(b));
  return d;
}

ManifoldDescriptor linf_ball_manifold(const Vector& y, double radius, double tol_active, bool tangent = true) {
  const Index n = y.size();
  ManifoldDescriptor d;
  d.label.family = "linf_ball_face";
  for (Index i = 0; i < n; ++i)
    if (std::abs(y[i]) >= radius * (1.0 - tol_active)) d.label.active.push_back(i);
  d.label.signs = signs_on(y, d.label.active);
  if (tangent) d.tangent = SubspaceBasis::coordinates(n, complement_of(d.label.active, n));
  return d;
}

ManifoldDescriptor l1_ball_manifold(const Vector& y, double radius, double tol_active, bool tangent = true) {
  const Index n = y.size();
  ManifoldDescriptor d;
  if (y.lpNorm<1>() < radius * (1.0 - tol_active)) {
    d.label.family = "interior";
    if (tangent) d.tangent = SubspaceBasis::full(n);
    return d;
  }
  d.label.family = "l1_ball_face";
  d.label.active = support_of(y, tol_active);
  d.label.signs = signs_on(y, d.label.active);
  Vector s = Vector::Zero(n);
  for (std::size_t j = 0; j < d.label.active.size(); ++j) s[d.label.active[j]] = d.label.signs[j];
  if (tangent) d.tangent = coordinates_orthogonal_to(n, d.label.active, s);
  return d;
}

struct SvdParts {
  Matrix U, V;
  Vector s;
};

SvdParts svd_of(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

// Orthonormal basis of {U A V^T + U B V_perp^T + U_perp C V^T}, vectorized column-major.
Matrix fixed_rank_tangent(const Matrix& Ufull, const Matrix& Vfull, Index r) {
  const Index n1 = Ufull.rows();
  const Index n2 = Vfull.rows();
  const Index dim = r * (n1 + n2 - r);
  Matrix b(n1 * n2, dim);
  Index col = 0;
  auto push = [&](Index i, Index j) {
    // vec(u_i v_j^T) = v_j (x) u_i
    for (Index q = 0; q < n2; ++q) b.col(col).segment(q * n1, n1) = Vfull(q, j) * Ufull.col(i);
    ++col;
  };
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < n2; ++j) push(i, j);
  for (Index i = r; i < n1; ++i)
    for (Index j = 0; j < r; ++j) push(i, j);
  return b;
}

ManifoldDescriptor rank_manifold(const ConvexFunctionSpec& f, const Vector& x, double tol_active, bool tangent = true) {
  ManifoldDescriptor d;
  d.label.family = "rank";
  const auto parts = svd_of(as_matrix(f, x));
  const double smax = parts.s.size() > 0 ? parts.s[0] : 0.0;
  Index r = 0;
  if (smax > 0.0)
    for (Index i = 0; i < parts.s.size(); ++i)
      if (parts.s[i] > tol_active * smax) ++r;
  d.label.rank = r;
  d.U = parts.U.leftCols(r);
  d.V = parts.V.leftCols(r);
  if (r == 0) {
    if (tangent) d.tangent = SubspaceBasis::zero(f.dim);
  } else {
    if (tangent) d.tangent = SubspaceBasis::from_orthonormal(fixed_rank_tangent(parts.U, parts.V, r));
  }
  return d;
}

// ---- subdifferential membership -------------------------------------------

struct SubdiffCheck {
  double consistency = 0.0;  // violation of the equality part
  double slack = kInf;       // slack of the inequality part
};

SubdiffCheck check_linf_ball_normal(const Vector& y, double radius, const Vector& u, double tol_active) {
  SubdiffCheck c;
  for (Index i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) >= radius * (1.0 - tol_active)) {
      const double coef = u[i] * sign_of(y[i]);
      c.consistency = std::max(c.consistency, -coef);
      c.slack = std::min(c.slack, coef);
    } else {
      c.consistency = std::max(c.consistency, std::abs(u[i]));
    }
  }
  return c;
}

SubdiffCheck check_l1_norm(const Vector& x, double mu, const Vector& u, double tol_active) {
  SubdiffCheck c;
  const auto s = support_of(x, tol_active);
  std::vector<bool> in(static_cast<std::size_t>(x.size()), false);
  for (Index i : s) {
    in[static_cast<std::size_t>(i)] = true;
    c.consistency = std::max(c.consistency, std::abs(u[i] - mu * sign_of(x[i])));
  }
  double off = -kInf;
  for (Index i = 0; i < x.size(); ++i)
    if (!in[static_cast<std::size_t>(i)]) off = std::max(off, std::abs(u[i]));
  if (off > -kInf) c.slack = mu - off;
  return c;
}

SubdiffCheck check_linf_norm(const Vector& x, double mu, const Vector& u, double tol_active) {
  SubdiffCheck c;
  const double m = x.size() > 0 ? x.cwiseAbs().maxCoeff() : 0.0;
  if (m == 0.0) {
    c.slack = mu - u.lpNorm<1>();
    return c;
  }
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) >= m * (1.0 - tol_active)) {
      const double coef = u[i] * sign_of(x[i]);
      total += coef;
      c.consistency = std::max(c.consistency, -coef);
      c.slack = std::min(c.slack, coef);
    } else {
      c.consistency = std::max(c.consistency, std::abs(u[i]));
    }
  }
  c.consistency = std::max(c.consistency, std::abs(total - mu));
  return c;
}

SubdiffCheck check_l1_ball_normal(const Vector& y, double radius, const Vector& u, double tol_active) {
  SubdiffCheck c;
  if (y.lpNorm<1>() < radius * (1.0 - tol_active)) {
    c.consistency = u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0;
    return c;
  }
  const auto s = support_of(y, tol_active);
  if (s.empty()) {
    // radius 0: the normal cone is the whole space.
    return c;
  }
  double lambda = 0.0;
  for (Index i : s) lambda += u[i] * sign_of(y[i]);
  lambda /= static_cast<double>(s.size());
  std::vector<bool> in(static_cast<std::size_t>(y.size()), false);
  for (Index i : s) {
    in[static_cast<std::size_t>(i)] = true;
    c.consistency = std::max(c.consistency, std::abs(u[i] - lambda * sign_of(y[i])));
  }
  c.consistency = std::max(c.consistency, -lambda);
  c.slack = lambda;
  for (Index i = 0; i < y.size(); ++i)
    if (!in[static_cast<std::size_t>(i)]) c.slack = std::min(c.slack, lambda - std::abs(u[i]));
  return c;
}

SubdiffCheck check_subdifferential(const ConvexFunctionSpec& f, const Vector& x, const Vector& u,
                                   double tol_active) {
  const double mu = f.scale;
  switch (f.kind) {
    case FunctionKind::L1:
      return check_l1_norm(x, mu, u, tol_active);
    case FunctionKind::GroupL12: {
      SubdiffCheck c;
      double max_norm = 0.0;
      for (const auto& b : f.blocks) {
        double n2 = 0.0;
        for (Index i : b) n2 += x[i] * x[i];
        max_norm = std::max(max_norm, std::sqrt(n2));
      }
      for (const auto& b : f.blocks) {
        double xn = 0.0, un = 0.0;
        for (Index i : b) {
          xn += x[i] * x[i];
          un += u[i] * u[i];
        }
        xn = std::sqrt(xn);
        un = std::sqrt(un);
        if (max_norm > 0.0 && xn > tol_active * max_norm) {
          double err = 0.0;
          for (Index i : b) err += std::pow(u[i] - mu * x[i] / xn, 2);
          c.consistency = std::max(c.consistency, std::sqrt(err));
        } else {
          c.slack = std::min(c.slack, mu - un);
        }
      }
      return c;
    }
    case FunctionKind::LInf:
      return check_linf_norm(x, mu, u, tol_active);
    case FunctionKind::Nuclear: {
      SubdiffCheck c;
      const auto d = rank_manifold(f, x, tol_active);
      const Matrix umat = as_matrix(f, u);
      const Matrix w = umat - mu * d.U * d.V.transpose();
      const Index r = d.label.rank;
      if (r > 0) {
        c.consistency = std::max((d.U.transpose() * w).cwiseAbs().maxCoeff(),
                                 (w * d.V).cwiseAbs().maxCoeff());
      }
      if (r < std::min(f.rows, f.cols)) {
        Eigen::JacobiSVD<Matrix> svd(w);
        c.slack = mu - svd.singularValues()[0];
      }
      return c;
    }
    case FunctionKind::IndicatorPoint: {
      const double dist = (x - f.center).cwiseAbs().maxCoeff();
      if (dist > 1e-6 * (1.0 + f.center.cwiseAbs().maxCoeff()))
        throw InvalidInput("indicator_point: x is outside the domain");
      return {};
    }
    case FunctionKind::IndicatorLInfBall: {
      const Vector y = x - f.center;
      if (y.cwiseAbs().maxCoeff() > f.radius * (1.0 + 1e-9) + 1e-12)
        throw InvalidInput("indicator_linf_ball: x is outside the ball");
      return check_linf_ball_normal(y, f.radius, u, tol_active);
    }
    case FunctionKind::IndicatorL1Ball: {
      const Vector y = x - f.center;
      if (y.lpNorm<1>() > f.radius * (1.0 + 1e-9) + 1e-12)
        throw InvalidInput("indicator_l1_ball: x is outside the ball");
      return check_l1_ball_normal(y, f.radius, u, tol_active);
    }
    case FunctionKind::Zero: {
      SubdiffCheck c;
      c.consistency = u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0;
      return c;
    }
  }
  throw InvalidInput("unknown function kind");
}

}  // namespace

std::string_view to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::L1: return "l1";
    case FunctionKind::GroupL12: return "group_l12";
    case FunctionKind::LInf: return "linf";
    case FunctionKind::Nuclear: return "nuclear";
    case FunctionKind::IndicatorPoint: return "indicator_point";
    case FunctionKind::IndicatorLInfBall: return "indicator_linf_ball";
    case FunctionKind::IndicatorL1Ball: return "indicator_l1_ball";
    case FunctionKind::Zero: return "zero";
  }
  return "unknown";
}

FunctionKind function_kind_from_string(std::string_view name) {
  for (auto k : {FunctionKind::L1, FunctionKind::GroupL12, FunctionKind::LInf, FunctionKind::Nuclear,
                 FunctionKind::IndicatorPoint, FunctionKind::IndicatorLInfBall,
                 FunctionKind::IndicatorL1Ball, FunctionKind::Zero}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown function kind '" + std::string(name) + "'");
}

ConvexFunctionSpec ConvexFunctionSpec::l1(Index n, double scale) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::L1;
  f.dim = n;
  f.scale = scale;
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::group_l12(Index n, std::vector<std::vector<Index>> blocks, double scale) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::GroupL12;
  f.dim = n;
  f.scale = scale;
  f.blocks = std::move(blocks);
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::group_l12_uniform(Index n, Index block_size, double scale) {
  if (block_size < 1 || n % block_size != 0) throw InvalidInput("block size must divide n");
  std::vector<std::vector<Index>> blocks;
  for (Index start = 0; start < n; start += block_size) {
    std::vector<Index> b(static_cast<std::size_t>(block_size));
    std::iota(b.begin(), b.end(), start);
    blocks.push_back(std::move(b));
  }
  return group_l12(n, std::move(blocks), scale);
}

ConvexFunctionSpec ConvexFunctionSpec::linf(Index n, double scale) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::LInf;
  f.dim = n;
  f.scale = scale;
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::nuclear(Index rows, Index cols, double scale) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::Nuclear;
  f.rows = rows;
  f.cols = cols;
  f.dim = rows * cols;
  f.scale = scale;
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::indicator_point(Vector b) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::IndicatorPoint;
  f.dim = b.size();
  f.center = std::move(b);
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::indicator_linf_ball(Vector center, double radius) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::IndicatorLInfBall;
  f.dim = center.size();
  f.center = std::move(center);
  f.radius = radius;
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::indicator_l1_ball(Vector center, double radius) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::IndicatorL1Ball;
  f.dim = center.size();
  f.center = std::move(center);
  f.radius = radius;
  f.validate();
  return f;
}

ConvexFunctionSpec ConvexFunctionSpec::zero(Index n) {
  ConvexFunctionSpec f;
  f.kind = FunctionKind::Zero;
  f.dim = n;
  f.validate();
  return f;
}

void ConvexFunctionSpec::validate() const {
  if (dim < 1) throw InvalidInput("function dimension must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("function scale must be positive");
  switch (kind) {
    case FunctionKind::GroupL12: {
      std::vector<int> seen(static_cast<std::size_t>(dim), 0);
      for (const auto& b : blocks) {
        if (b.empty()) throw InvalidInput("group_l12: empty block");
        for (Index i : b) {
          if (i < 0 || i >= dim) throw InvalidInput("group_l12: block index out of range");
          ++seen[static_cast<std::size_t>(i)];
        }
      }
      for (int s : seen)
        if (s != 1) throw InvalidInput("group_l12: blocks must partition {0..n-1} exactly");
      break;
    }
    case FunctionKind::Nuclear:
      if (rows < 1 || cols < 1 || rows * cols != dim) throw InvalidInput("nuclear: inconsistent shape");
      break;
    case FunctionKind::IndicatorPoint:
      if (center.size() != dim) throw InvalidInput("indicator_point: center dimension mismatch");
      break;
    case FunctionKind::IndicatorLInfBall:
    case FunctionKind::IndicatorL1Ball:
      if (center.size() != dim) throw InvalidInput("ball indicator: center dimension mismatch");
      if (!(radius >= 0.0) || !std::isfinite(radius)) throw InvalidInput("ball indicator: radius must be >= 0");
      break;
    default:
      break;
  }
}

bool ConvexFunctionSpec::is_polyhedral() const {
  return kind != FunctionKind::GroupL12 && kind != FunctionKind::Nuclear;
}

bool ConvexFunctionSpec::conjugate_is_polyhedral() const { return is_polyhedral(); }

SmoothFunctionSpec SmoothFunctionSpec::zero(Index n) {
  SmoothFunctionSpec s;
  s.dim = n;
  return s;
}

SmoothFunctionSpec SmoothFunctionSpec::quadratic(LinearOperator K, Vector b) {
  if (b.size() != K.out_dim()) throw InvalidInput("quadratic: b must have K.out_dim entries");
  SmoothFunctionSpec s;
  s.kind = Kind::Quadratic;
  s.dim = K.in_dim();
  s.K = std::move(K);
  s.b = std::move(b);
  return s;
}

double SmoothFunctionSpec::value(const Vector& x) const {
  if (x.size() != dim) throw InvalidInput("smooth value: dimension mismatch");
  if (is_zero()) return 0.0;
  return 0.5 * (K->apply(x) - b).squaredNorm();
}

Vector SmoothFunctionSpec::gradient(const Vector& x) const {
  if (x.size() != dim) throw InvalidInput("smooth gradient: dimension mismatch");
  if (is_zero()) return Vector::Zero(dim);
  return K->adjoint_apply(K->apply(x) - b);
}

Matrix SmoothFunctionSpec::hessian() const {
  if (is_zero()) return Matrix::Zero(dim, dim);
  const Matrix k = K->to_dense();
  return k.transpose() * k;
}

double SmoothFunctionSpec::beta() const {
  if (is_zero()) return kInf;
  const double n = operator_norm(*K);
  return n > 0.0 ? 1.0 / (n * n) : kInf;
}

std::uint64_t ManifoldLabel::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  };
  for (unsigned char c : family) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  mix(active.size());
  for (Index i : active) mix(static_cast<std::uint64_t>(i));
  mix(signs.size());
  for (int s : signs) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(s)));
  mix(static_cast<std::uint64_t>(rank));
  return h;
}

std::string ManifoldLabel::to_string() const {
  std::ostringstream out;
  out << family;
  if (!active.empty()) {
    out << '{';
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (i > 0) out << ',';
      if (!signs.empty()) out << (signs[i] > 0 ? '+' : (signs[i] < 0 ? '-' : '0'));
      out << active[i];
    }
    out << '}';
  }
  if (family == "rank" || family == "spectral_face") out << '=' << rank;
  return out.str();
}

double l1_ball_threshold(const Vector& y, double radius) {
  if (y.lpNorm<1>() <= radius) return 0.0;
  std::vector<double> a(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(y[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    cumsum += a[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (a[j] - t > 0.0) theta = t;
  }
  return std::max(theta, 0.0);
}

Vector project_l1_ball(const Vector& y, double radius) {
  if (y.lpNorm<1>() <= radius) return y;
  return soft_threshold(y, l1_ball_threshold(y, radius));
}

Vector prox(const ConvexFunctionSpec& f, double gamma, const Vector& x) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("prox: gamma must be positive");
  require_dim(f, x, "prox");
  const double t = gamma * f.scale;
  switch (f.kind) {
    case FunctionKind::L1:
      return soft_threshold(x, t);
    case FunctionKind::GroupL12: {
      Vector out = x;
      for (const auto& b : f.blocks) {
        double n2 = 0.0;
        for (Index i : b) n2 += x[i] * x[i];
        const double n = std::sqrt(n2);
        const double shrink = n > t ? 1.0 - t / n : 0.0;
        for (Index i : b) out[i] = shrink * x[i];
      }
      return out;
    }
    case FunctionKind::LInf: {
      // x - P_{B1(t)}(x) is the clamp at the l1-projection threshold.
      if (x.lpNorm<1>() <= t) return Vector::Zero(x.size());
      return clamp(x, l1_ball_threshold(x, t));
    }
    case FunctionKind::Nuclear: {
      auto parts = svd_of(as_matrix(f, x));
      const Index k = parts.s.size();
      Vector s = soft_threshold(parts.s, t);
      const Matrix out = parts.U.leftCols(k) * s.asDiagonal() * parts.V.leftCols(k).transpose();
      return vec(out);
    }
    case FunctionKind::IndicatorPoint:
      return f.center;
    case FunctionKind::IndicatorLInfBall:
      return f.center + clamp(x - f.center, f.radius);
    case FunctionKind::IndicatorL1Ball:
      return f.center + project_l1_ball(x - f.center, f.radius);
    case FunctionKind::Zero:
      return x;
  }
  throw InvalidInput("unknown function kind");
}

Vector prox_conjugate(const ConvexFunctionSpec& f, double gamma, const Vector& x) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("prox_conjugate: gamma must be positive");
  require_dim(f, x, "prox_conjugate");
  return x - gamma * prox(f, 1.0 / gamma, x / gamma);
}

NdCertificate nd_certificate(const ConvexFunctionSpec& f, const Vector& x, const Vector& u, double tol) {
  require_dim(f, x, "nd_certificate");
  require_dim(f, u, "nd_certificate");
  const auto c = check_subdifferential(f, x, u, kDefaultActivityTolerance);
  const double consistency_tol = 1e-7 * std::max({1.0, f.scale, u.cwiseAbs().maxCoeff()});
  NdCertificate out;
  if (c.consistency > consistency_tol) {
    out.margin = -c.consistency;
    out.holds = false;
    return out;
  }
  out.margin = std::max(c.slack, 0.0);
  out.holds = c.slack > tol;
  return out;
}

bool in_subdifferential(const ConvexFunctionSpec& f, const Vector& x, const Vector& u, double tol) {
  require_dim(f, x, "in_subdifferential");
  require_dim(f, u, "in_subdifferential");
  const auto c = check_subdifferential(f, x, u, kDefaultActivityTolerance);
  return c.consistency <= tol && c.slack >= -tol;
}

namespace {

ManifoldDescriptor manifold_impl(const ConvexFunctionSpec& f, const Vector& x, double tol_active, bool tangent) {
  const Index n = f.dim;
  switch (f.kind) {
    case FunctionKind::L1:
      return support_manifold(x, tol_active, tangent);
    case FunctionKind::GroupL12: {
      ManifoldDescriptor d;
      d.label.family = "blocks";
      std::vector<double> norms;
      for (const auto& b : f.blocks) {
        double n2 = 0.0;
        for (Index i : b) n2 += x[i] * x[i];
        norms.push_back(std::sqrt(n2));
      }
      const double m = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
      std::vector<Index> coords;
      if (m > 0.0) {
        for (std::size_t k = 0; k < norms.size(); ++k) {
          if (norms[k] > tol_active * m) {
            d.label.active.push_back(static_cast<Index>(k));
            coords.insert(coords.end(), f.blocks[k].begin(), f.blocks[k].end());
          }
        }
      }
      std::sort(coords.begin(), coords.end());
      if (tangent) d.tangent = SubspaceBasis::coordinates(n, coords);
      return d;
    }
    case FunctionKind::LInf:
      return linf_norm_manifold(x, tol_active, tangent);
    case FunctionKind::Nuclear:
      return rank_manifold(f, x, tol_active, tangent);
    case FunctionKind::IndicatorPoint: {
      ManifoldDescriptor d;
      d.label.family = "singleton";
      if (tangent) d.tangent = SubspaceBasis::zero(n);
      return d;
    }
    case FunctionKind::IndicatorLInfBall:
      return linf_ball_manifold(x - f.center, f.radius, tol_active, tangent);
    case FunctionKind::IndicatorL1Ball:
      return l1_ball_manifold(x - f.center, f.radius, tol_active, tangent);
    case FunctionKind::Zero: {
      ManifoldDescriptor d;
      d.label.family = "full";
      if (tangent) d.tangent = SubspaceBasis::full(n);
      return d;
    }
  }
  throw InvalidInput("unknown function kind");
}

ManifoldDescriptor conjugate_impl(const ConvexFunctionSpec& f, const Vector& v, double tol_active, bool tangent) {
  const Index n = f.dim;
  switch (f.kind) {
    case FunctionKind::L1:  // indicator of the linf ball of radius mu
      return linf_ball_manifold(v, f.scale, tol_active, tangent);
    case FunctionKind::LInf:  // indicator of the l1 ball of radius mu
      return l1_ball_manifold(v, f.scale, tol_active, tangent);
    case FunctionKind::GroupL12: {  // indicator of {max_b ||v_b|| <= mu}
      ManifoldDescriptor d;
      d.label.family = "l2_ball_faces";
      Matrix normals(n, 0);
      for (std::size_t k = 0; k < f.blocks.size(); ++k) {
        double n2 = 0.0;
        for (Index i : f.blocks[k]) n2 += v[i] * v[i];
        if (std::sqrt(n2) >= f.scale * (1.0 - tol_active)) {
          d.label.active.push_back(static_cast<Index>(k));
          normals.conservativeResize(n, normals.cols() + 1);
          normals.col(normals.cols() - 1).setZero();
          for (Index i : f.blocks[k]) normals(i, normals.cols() - 1) = v[i];
        }
      }
      if (tangent) d.tangent = SubspaceBasis::span_of(normals, n).orthogonal_complement();
      return d;
    }
    case FunctionKind::Nuclear: {  // indicator of the spectral-norm ball of radius mu
      ManifoldDescriptor d;
      d.label.family = "spectral_face";
      const auto parts = svd_of(as_matrix(f, v));
      Index a = 0;
      for (Index i = 0; i < parts.s.size(); ++i)
        if (parts.s[i] >= f.scale * (1.0 - tol_active)) ++a;
      d.label.rank = a;
      d.U = parts.U.leftCols(a);
      d.V = parts.V.leftCols(a);
      Matrix normals(n, a * (a + 1) / 2);
      Index col = 0;
      for (Index i = 0; i < a; ++i) {
        for (Index j = i; j < a; ++j) {
          const Matrix m = d.U.col(i) * d.V.col(j).transpose() + d.U.col(j) * d.V.col(i).transpose();
          normals.col(col++) = vec(m);
        }
      }
      if (tangent) d.tangent = SubspaceBasis::span_of(normals, n).orthogonal_complement();
      return d;
    }
    case FunctionKind::IndicatorPoint: {  // linear function <v, b>
      ManifoldDescriptor d;
      d.label.family = "full";
      if (tangent) d.tangent = SubspaceBasis::full(n);
      return d;
    }
    case FunctionKind::IndicatorLInfBall:  // <v, b> + tau ||v||_1
      if (f.radius == 0.0) {
        ManifoldDescriptor d;
        d.label.family = "full";
        if (tangent) d.tangent = SubspaceBasis::full(n);
        return d;
      }
      return support_manifold(v, tol_active, tangent);
    case FunctionKind::IndicatorL1Ball:  // <v, b> + tau ||v||_inf
      if (f.radius == 0.0) {
        ManifoldDescriptor d;
        d.label.family = "full";
        if (tangent) d.tangent = SubspaceBasis::full(n);
        return d;
      }
      return linf_norm_manifold(v, tol_active, tangent);
    case FunctionKind::Zero: {  // indicator of the origin
      ManifoldDescriptor d;
      d.label.family = "singleton";
      if (tangent) d.tangent = SubspaceBasis::zero(n);
      return d;
    }
  }
  throw InvalidInput("unknown function kind");
}

}  // namespace

ManifoldDescriptor manifold_at(const ConvexFunctionSpec& f, const Vector& x, double tol_active) {
  require_dim(f, x, "manifold_at");
  return manifold_impl(f, x, tol_active, true);
}

ManifoldDescriptor conjugate_manifold_at(const ConvexFunctionSpec& f, const Vector& v, double tol_active) {
  require_dim(f, v, "conjugate_manifold_at");
  return conjugate_impl(f, v, tol_active, true);
}

ManifoldLabel manifold_label(const ConvexFunctionSpec& f, const Vector& x, double tol_active) {
  require_dim(f, x, "manifold_label");
  return manifold_impl(f, x, tol_active, false).label;
}

ManifoldLabel conjugate_manifold_label(const ConvexFunctionSpec& f, const Vector& v, double tol_active) {
  require_dim(f, v, "conjugate_manifold_label");
  return conjugate_impl(f, v, tol_active, false).label;
}

std::optional<Matrix> riemannian_hessian(const ConvexFunctionSpec& f, const Vector& x, const Vector& tilt,
                                         double tol_active) {
  require_dim(f, x, "riemannian_hessian");
  require_dim(f, tilt, "riemannian_hessian");
  const Index n = f.dim;
  switch (f.kind) {
    case FunctionKind::Nuclear:
      return std::nullopt;
    case FunctionKind::GroupL12: {
      Matrix h = Matrix::Zero(n, n);
      const auto d = manifold_at(f, x, tol_active);
      for (Index k : d.label.active) {
        const auto& b = f.blocks[static_cast<std::size_t>(k)];
        const Index s = static_cast<Index>(b.size());
        Vector xb(s);
        for (Index j = 0; j < s; ++j) xb[j] = x[b[static_cast<std::size_t>(j)]];
        const double nb = xb.norm();
        const Vector w = xb / nb;
        const Matrix local = f.scale * (Matrix::Identity(s, s) - w * w.transpose()) / nb;
        for (Index p = 0; p < s; ++p)
          for (Index q = 0; q < s; ++q)
            h(b[static_cast<std::size_t>(p)], b[static_cast<std::size_t>(q)]) = local(p, q);
      }
      return h;
    }
    default:
      return Matrix::Zero(n, n);
  }
}

std::optional<Matrix> conjugate_riemannian_hessian(const ConvexFunctionSpec& f, const Vector& v,
                                                   double /*tol_active*/) {
  require_dim(f, v, "conjugate_riemannian_hessian");
  if (!f.conjugate_is_polyhedral()) return std::nullopt;
  return Matrix::Zero(f.dim, f.dim);
}

}  // namespace pdsplit
