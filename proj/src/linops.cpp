#include "pdsplit/linops.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace pdsplit {

namespace {

void require_length(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected) {
    std::ostringstream msg;
    msg << what << ": expected length " << expected << ", got " << v.size();
    throw InvalidInput(msg.str());
  }
}

}  // namespace

LinearOperator LinearOperator::dense(Matrix m) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("dense operator must be non-empty");
  const Index rows = m.rows();
  const Index cols = m.cols();
  return LinearOperator(cols, rows, DenseOp{std::make_shared<const Matrix>(std::move(m))});
}

LinearOperator LinearOperator::finite_difference(Index n, Boundary boundary) {
  if (n < 1) throw InvalidInput("finite difference size must be positive");
  return LinearOperator(n, n, FiniteDifferenceOp{boundary});
}

LinearOperator LinearOperator::identity(Index n) {
  if (n < 1) throw InvalidInput("identity size must be positive");
  return LinearOperator(n, n, IdentityOp{});
}

LinearOperator LinearOperator::stack(std::vector<LinearOperator> members) {
  if (members.empty()) throw InvalidInput("stack needs at least one member");
  const Index in = members.front().in_dim();
  Index out = 0;
  for (const auto& m : members) {
    if (m.in_dim() != in) throw InvalidInput("stack members must share in_dim");
    out += m.out_dim();
  }
  return LinearOperator(in, out,
                        StackOp{std::make_shared<const std::vector<LinearOperator>>(std::move(members))});
}

Vector LinearOperator::apply(const Vector& x) const {
  require_length(x, in_dim_, "apply");
  return std::visit(
      [&](const auto& op) -> Vector {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          return (*op.m) * x;
        } else if constexpr (std::is_same_v<T, FiniteDifferenceOp>) {
          Vector y = Vector::Zero(out_dim_);
          for (Index i = 0; i + 1 < in_dim_; ++i) y[i] = x[i + 1] - x[i];
          return y;
        } else if constexpr (std::is_same_v<T, IdentityOp>) {
          return x;
        } else {
          Vector y(out_dim_);
          Index offset = 0;
          for (const auto& m : *op.members) {
            y.segment(offset, m.out_dim()) = m.apply(x);
            offset += m.out_dim();
          }
          return y;
        }
      },
      op_);
}

Vector LinearOperator::adjoint_apply(const Vector& y) const {
  require_length(y, out_dim_, "adjoint_apply");
  return std::visit(
      [&](const auto& op) -> Vector {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          return op.m->transpose() * y;
        } else if constexpr (std::is_same_v<T, FiniteDifferenceOp>) {
          // Transpose of the forward-difference rows; row n-1 is zero.
          Vector x = Vector::Zero(in_dim_);
          for (Index i = 0; i + 1 < in_dim_; ++i) {
            x[i] -= y[i];
            x[i + 1] += y[i];
          }
          return x;
        } else if constexpr (std::is_same_v<T, IdentityOp>) {
          return y;
        } else {
          Vector x = Vector::Zero(in_dim_);
          Index offset = 0;
          for (const auto& m : *op.members) {
            x += m.adjoint_apply(y.segment(offset, m.out_dim()));
            offset += m.out_dim();
          }
          return x;
        }
      },
      op_);
}

Matrix LinearOperator::to_dense() const {
  if (is_dense()) return matrix();
  Matrix out(out_dim_, in_dim_);
  Vector e = Vector::Zero(in_dim_);
  for (Index j = 0; j < in_dim_; ++j) {
    e[j] = 1.0;
    out.col(j) = apply(e);
    e[j] = 0.0;
  }
  return out;
}

bool LinearOperator::is_dense() const { return std::holds_alternative<DenseOp>(op_); }
bool LinearOperator::is_identity() const { return std::holds_alternative<IdentityOp>(op_); }
bool LinearOperator::is_finite_difference() const {
  return std::holds_alternative<FiniteDifferenceOp>(op_);
}
bool LinearOperator::is_stack() const { return std::holds_alternative<StackOp>(op_); }

const Matrix& LinearOperator::matrix() const {
  if (!is_dense()) throw InvalidInput("operator is not dense");
  return *std::get<DenseOp>(op_).m;
}

const std::vector<LinearOperator>& LinearOperator::members() const {
  if (!is_stack()) throw InvalidInput("operator is not a stack");
  return *std::get<StackOp>(op_).members;
}

double operator_norm(const LinearOperator& op) {
  if (op.is_identity()) return 1.0;
  if (std::max(op.in_dim(), op.out_dim()) > 2000) return power_iteration_norm(op);

  const Matrix a = op.to_dense();
  const Matrix gram = a.rows() <= a.cols() ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("operator_norm: eigensolver failed");
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double power_iteration_norm(const LinearOperator& op, const PowerIterationOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(op.in_dim());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vector w = op.adjoint_apply(op.apply(v));
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= opts.tolerance * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(0.0, lambda));
}

SubspaceBasis SubspaceBasis::from_orthonormal(Matrix columns) {
  const Index ambient = columns.rows();
  if (columns.cols() > 0) {
    const Matrix gram = columns.transpose() * columns;
    const double err = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-10) throw InvalidInput("basis columns are not orthonormal");
  }
  return SubspaceBasis(std::move(columns), ambient);
}

SubspaceBasis SubspaceBasis::span_of(const Matrix& spanning, Index ambient_dim) {
  if (spanning.cols() == 0) return zero(ambient_dim);
  if (spanning.rows() != ambient_dim) throw InvalidInput("span_of: ambient dimension mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(spanning);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  Matrix q = qr.householderQ() * Matrix::Identity(ambient_dim, rank);
  return SubspaceBasis(std::move(q), ambient_dim);
}

SubspaceBasis SubspaceBasis::coordinates(Index ambient_dim, std::span<const Index> indices) {
  Matrix b = Matrix::Zero(ambient_dim, static_cast<Index>(indices.size()));
  for (Index j = 0; j < static_cast<Index>(indices.size()); ++j) {
    const Index i = indices[static_cast<std::size_t>(j)];
    if (i < 0 || i >= ambient_dim) throw InvalidInput("coordinate index out of range");
    b(i, j) = 1.0;
  }
  return SubspaceBasis(std::move(b), ambient_dim);
}

SubspaceBasis SubspaceBasis::full(Index ambient_dim) {
  return SubspaceBasis(Matrix::Identity(ambient_dim, ambient_dim), ambient_dim);
}

SubspaceBasis SubspaceBasis::zero(Index ambient_dim) { return SubspaceBasis(Matrix(ambient_dim, 0), ambient_dim); }

Matrix SubspaceBasis::projector() const { return basis_ * basis_.transpose(); }

Vector SubspaceBasis::project(const Vector& x) const {
  if (x.size() != ambient_) throw InvalidInput("project: dimension mismatch");
  if (dim() == 0) return Vector::Zero(ambient_);
  return basis_ * (basis_.transpose() * x);
}

SubspaceBasis SubspaceBasis::orthogonal_complement() const {
  if (dim() == 0) return full(ambient_);
  if (dim() == ambient_) return zero(ambient_);
  Eigen::HouseholderQR<Matrix> qr(basis_);
  Matrix q = qr.householderQ();
  return SubspaceBasis(q.rightCols(ambient_ - dim()), ambient_);
}

namespace {

// B_v^T L B_x, the restriction expressed in the two bases.
Matrix restricted_core(const LinearOperator& op, const SubspaceBasis& tx, const SubspaceBasis& tv) {
  if (tx.ambient_dim() != op.in_dim() || tv.ambient_dim() != op.out_dim()) {
    throw InvalidInput("restrict: subspace ambient dimensions do not match operator");
  }
  Matrix lbx(op.out_dim(), tx.dim());
  for (Index j = 0; j < tx.dim(); ++j) lbx.col(j) = op.apply(tx.basis().col(j));
  return tv.basis().transpose() * lbx;
}

}  // namespace

Matrix restrict_operator(const LinearOperator& op, const SubspaceBasis& tx, const SubspaceBasis& tv) {
  const Matrix core = restricted_core(op, tx, tv);
  if (core.size() == 0) return Matrix::Zero(op.out_dim(), op.in_dim());
  return tv.basis() * core * tx.basis().transpose();
}

RestrictedSvd restricted_singular_values(const LinearOperator& op, const SubspaceBasis& tx,
                                         const SubspaceBasis& tv) {
  const Matrix core = restricted_core(op, tx, tv);
  RestrictedSvd out;
  if (core.size() == 0) {
    out.U = Matrix(op.out_dim(), 0);
    out.V = Matrix(op.in_dim(), 0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  out.U = tv.basis() * svd.matrixU();
  out.V = tx.basis() * svd.matrixV();
  out.sigma_max = out.singular_values.size() > 0 ? out.singular_values[0] : 0.0;
  if (out.sigma_max <= 0.0) return out;
  const double cutoff = kRankThreshold * out.sigma_max;
  for (Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values[i] > cutoff) {
      ++out.rank;
      out.sigma_min_nonzero = out.singular_values[i];
    }
  }
  return out;
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidInput("matrix csv: cannot parse cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput("matrix csv: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("matrix csv: empty input");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

}  // namespace pdsplit
