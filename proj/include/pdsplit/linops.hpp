#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pdsplit {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when caller-supplied data violates an operation's preconditions
/// (dimension mismatch, out-of-range parameter, malformed payload).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iteration or factorization produces non-finite values or
/// fails to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Boundary { Neumann };

/// Immutable dimension-tagged linear map R^in_dim -> R^out_dim.
///
/// Variants: a dense matrix, the 1-D forward-difference operator with a
/// Neumann boundary (last output row identically zero, so the operator is
/// square), the identity, and a vertical stack of operators sharing in_dim.
/// Copies are cheap; the payload is shared and never mutated.
class LinearOperator {
 public:
  static LinearOperator dense(Matrix m);
  static LinearOperator finite_difference(Index n, Boundary boundary = Boundary::Neumann);
  static LinearOperator identity(Index n);
  static LinearOperator stack(std::vector<LinearOperator> members);

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }

  Vector apply(const Vector& x) const;
  Vector adjoint_apply(const Vector& y) const;

  /// Explicit out_dim x in_dim matrix.
  Matrix to_dense() const;

  bool is_dense() const;
  bool is_identity() const;
  bool is_finite_difference() const;
  bool is_stack() const;

  /// Dense payload; only valid when is_dense().
  const Matrix& matrix() const;
  /// Members; only valid when is_stack().
  const std::vector<LinearOperator>& members() const;

 private:
  struct DenseOp {
    std::shared_ptr<const Matrix> m;
  };
  struct FiniteDifferenceOp {
    Boundary boundary;
  };
  struct IdentityOp {};
  struct StackOp {
    std::shared_ptr<const std::vector<LinearOperator>> members;
  };
  using Variant = std::variant<DenseOp, FiniteDifferenceOp, IdentityOp, StackOp>;

  LinearOperator(Index in_dim, Index out_dim, Variant v)
      : in_dim_(in_dim), out_dim_(out_dim), op_(std::move(v)) {}

  Index in_dim_;
  Index out_dim_;
  Variant op_;
};

/// ||L|| (largest singular value). Operators with max(in_dim, out_dim) <= 2000
/// use a dense symmetric eigensolve of the smaller Gram matrix; larger ones
/// fall back to power_iteration_norm.
double operator_norm(const LinearOperator& op);

struct PowerIterationOptions {
  int max_iterations = 5000;
  double tolerance = 1e-12;  // on the change of the Rayleigh quotient
  std::uint64_t seed = 0x5EED;
};

/// Power iteration on L*L; returns sqrt of the converged Rayleigh quotient.
double power_iteration_norm(const LinearOperator& op, const PowerIterationOptions& opts = {});

/// Orthonormal basis of a linear subspace of R^ambient_dim, stored as the
/// columns of an ambient_dim x dim matrix.
class SubspaceBasis {
 public:
  SubspaceBasis() = default;

  /// Takes ownership of an already orthonormal column set. Checked to 1e-10.
  static SubspaceBasis from_orthonormal(Matrix columns);
  /// Orthonormalizes an arbitrary spanning set (rank-revealing QR).
  static SubspaceBasis span_of(const Matrix& spanning, Index ambient_dim);
  static SubspaceBasis coordinates(Index ambient_dim, std::span<const Index> indices);
  static SubspaceBasis full(Index ambient_dim);
  static SubspaceBasis zero(Index ambient_dim);

  Index ambient_dim() const { return ambient_; }
  Index dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }

  Matrix projector() const;
  Vector project(const Vector& x) const;
  SubspaceBasis orthogonal_complement() const;

 private:
  SubspaceBasis(Matrix b, Index ambient) : basis_(std::move(b)), ambient_(ambient) {}

  Matrix basis_;
  Index ambient_ = 0;
};

/// Dense out_dim x in_dim matrix of P_{tv} L P_{tx}.
Matrix restrict_operator(const LinearOperator& op, const SubspaceBasis& tx, const SubspaceBasis& tv);

struct RestrictedSvd {
  /// Smallest singular value above 1e-10 * sigma_max; empty when rank == 0.
  std::optional<double> sigma_min_nonzero;
  double sigma_max = 0.0;
  Index rank = 0;
  Matrix U;                 // out_dim x k, left singular vectors in ambient coordinates
  Vector singular_values;   // descending, k = min(dim tv, dim tx)
  Matrix V;                 // in_dim x k
};

inline constexpr double kRankThreshold = 1e-10;

RestrictedSvd restricted_singular_values(const LinearOperator& op, const SubspaceBasis& tx,
                                         const SubspaceBasis& tv);

Matrix read_matrix_csv(std::istream& in);
void write_matrix_csv(std::ostream& out, const Matrix& m);

}  // namespace pdsplit
