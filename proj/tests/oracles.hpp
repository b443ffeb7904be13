#pragma once

// Test-side reference implementations, written independently of the library.

#include "pdsplit/functions.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace oracle {

using pdsplit::ConvexFunctionSpec;
using pdsplit::FunctionKind;
using pdsplit::Index;
using pdsplit::Matrix;
using pdsplit::Vector;

inline Vector soft(const Vector& y, double t) {
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) out[i] = std::copysign(std::max(std::abs(y[i]) - t, 0.0), y[i]);
  return out;
}

/// Projection onto the l1 ball by bisection on the threshold.
inline Vector project_l1(const Vector& y, double r) {
  if (y.lpNorm<1>() <= r) return y;
  double lo = 0.0, hi = y.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mass = (y.cwiseAbs().array() - mid).max(0.0).sum();
    (mass > r ? lo : hi) = mid;
  }
  return soft(y, 0.5 * (lo + hi));
}

/// prox_{t f*}(y) from the closed form of each conjugate.
inline Vector conjugate_prox(const ConvexFunctionSpec& f, double t, const Vector& y) {
  const double mu = f.scale;
  switch (f.kind) {
    case FunctionKind::L1:
      return y.cwiseMax(-mu).cwiseMin(mu);
    case FunctionKind::LInf:
      return project_l1(y, mu);
    case FunctionKind::GroupL12: {
      Vector out = y;
      for (const auto& b : f.blocks) {
        double nrm = 0.0;
        for (Index i : b) nrm += y[i] * y[i];
        nrm = std::sqrt(nrm);
        if (nrm > mu)
          for (Index i : b) out[i] = y[i] * mu / nrm;
      }
      return out;
    }
    case FunctionKind::Nuclear: {
      const Matrix Y = Eigen::Map<const Matrix>(y.data(), f.rows, f.cols);
      Eigen::JacobiSVD<Matrix> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector s = svd.singularValues().cwiseMin(mu);
      const Matrix P = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
      return Eigen::Map<const Vector>(P.data(), P.size());
    }
    case FunctionKind::IndicatorPoint:
      return y - t * f.center;
    case FunctionKind::IndicatorLInfBall:
      return soft(y - t * f.center, t * f.radius);
    case FunctionKind::IndicatorL1Ball: {
      const Vector w = y - t * f.center;
      return w - project_l1(w, t * f.radius);
    }
    case FunctionKind::Zero:
      return Vector::Zero(y.size());
  }
  return y;
}

/// One representative of each registered kind, dimension 12 (3 x 4 for Nuclear).
inline std::vector<ConvexFunctionSpec> all_kinds(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector c(12);
  for (Index i = 0; i < 12; ++i) c[i] = g(rng);
  return {ConvexFunctionSpec::l1(12, 0.7),
          ConvexFunctionSpec::group_l12(12, {{0, 1, 2}, {3, 4}, {5, 6, 7, 8}, {9, 10, 11}}, 1.3),
          ConvexFunctionSpec::linf(12, 0.9),
          ConvexFunctionSpec::nuclear(3, 4, 1.1),
          ConvexFunctionSpec::indicator_point(c),
          ConvexFunctionSpec::indicator_linf_ball(c, 0.8),
          ConvexFunctionSpec::indicator_l1_ball(c, 2.5),
          ConvexFunctionSpec::zero(12)};
}

}  // namespace oracle
