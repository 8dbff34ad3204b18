#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "fbf/core.hpp"

namespace fbf {

enum class LinOpKind { general, dense, identity, zero };

/// Bounded linear map between finite-dimensional spaces, carried with its
/// adjoint. Values are immutable; apply/adjoint are reentrant.
class LinOp {
 public:
  using Map = std::function<Vector(const Vector&)>;

  LinOp() = default;

  LinOp(int in_dim, int out_dim, Map apply, Map adjoint, std::string tag,
        LinOpKind kind = LinOpKind::general)
      : in_dim_(in_dim),
        out_dim_(out_dim),
        apply_(std::move(apply)),
        adjoint_(std::move(adjoint)),
        tag_(std::move(tag)),
        kind_(kind) {
    if (in_dim < 1 || out_dim < 1)
      throw SpecificationError("LinOp '" + tag_ + "': dimensions must be positive");
  }

  int in_dim() const noexcept { return in_dim_; }
  int out_dim() const noexcept { return out_dim_; }
  const std::string& tag() const noexcept { return tag_; }
  LinOpKind kind() const noexcept { return kind_; }
  bool is_identity() const noexcept { return kind_ == LinOpKind::identity; }
  bool is_zero() const noexcept { return kind_ == LinOpKind::zero; }

  /// Backing matrix for dense operators, nullptr otherwise.
  const Matrix* dense_matrix() const noexcept { return matrix_.get(); }

  Vector apply(const Vector& x) const {
    if (x.size() != in_dim_)
      throw SpecificationError("LinOp '" + tag_ + "': apply expects dim " + std::to_string(in_dim_) +
                               ", got " + std::to_string(x.size()));
    return apply_(x);
  }

  Vector adjoint(const Vector& y) const {
    if (y.size() != out_dim_)
      throw SpecificationError("LinOp '" + tag_ + "': adjoint expects dim " + std::to_string(out_dim_) +
                               ", got " + std::to_string(y.size()));
    return adjoint_(y);
  }

  /// The adjoint as an operator in its own right.
  LinOp transposed() const {
    if (matrix_) return from_dense(matrix_->transpose(), tag_ + "*");
    return LinOp(out_dim_, in_dim_, adjoint_, apply_, tag_ + "*", kind_);
  }

  static LinOp from_dense(Matrix m, std::string tag) {
    if (m.rows() < 1 || m.cols() < 1) throw SpecificationError("dense LinOp '" + tag + "': empty matrix");
    auto mat = std::make_shared<const Matrix>(std::move(m));
    LinOp op(
        static_cast<int>(mat->cols()), static_cast<int>(mat->rows()),
        [mat](const Vector& x) -> Vector { return (*mat) * x; },
        [mat](const Vector& y) -> Vector { return mat->transpose() * y; }, std::move(tag), LinOpKind::dense);
    op.matrix_ = mat;
    return op;
  }

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  Map apply_;
  Map adjoint_;
  std::string tag_;
  LinOpKind kind_ = LinOpKind::general;
  std::shared_ptr<const Matrix> matrix_;
};

inline LinOp dense(Matrix m, std::string tag = "dense") { return LinOp::from_dense(std::move(m), std::move(tag)); }

inline LinOp identity(int dim) {
  return LinOp(
      dim, dim, [](const Vector& x) { return x; }, [](const Vector& y) { return y; }, "identity",
      LinOpKind::identity);
}

inline LinOp zero_op(int in_dim, int out_dim) {
  return LinOp(
      in_dim, out_dim, [out_dim](const Vector&) -> Vector { return Vector::Zero(out_dim); },
      [in_dim](const Vector&) -> Vector { return Vector::Zero(in_dim); }, "zero", LinOpKind::zero);
}

inline LinOp scaled(double alpha, const LinOp& op) {
  return LinOp(
      op.in_dim(), op.out_dim(), [op, alpha](const Vector& x) -> Vector { return alpha * op.apply(x); },
      [op, alpha](const Vector& y) -> Vector { return alpha * op.adjoint(y); },
      std::to_string(alpha) + "*" + op.tag());
}

/// outer ∘ inner, with adjoint inner* ∘ outer*.
inline LinOp compose(const LinOp& outer, const LinOp& inner) {
  if (inner.out_dim() != outer.in_dim())
    throw SpecificationError("compose: '" + inner.tag() + "' maps to dim " + std::to_string(inner.out_dim()) +
                             " but '" + outer.tag() + "' expects " + std::to_string(outer.in_dim()));
  if (outer.is_identity()) return inner;
  if (inner.is_identity()) return outer;
  if (outer.is_zero() || inner.is_zero()) return zero_op(inner.in_dim(), outer.out_dim());
  return LinOp(
      inner.in_dim(), outer.out_dim(), [outer, inner](const Vector& x) { return outer.apply(inner.apply(x)); },
      [outer, inner](const Vector& y) { return inner.adjoint(outer.adjoint(y)); },
      outer.tag() + "∘" + inner.tag());
}

/// Dense matrix of an operator, assembled column by column from basis vectors.
inline Matrix materialize(const LinOp& op) {
  if (const Matrix* m = op.dense_matrix()) return *m;
  Matrix out(op.out_dim(), op.in_dim());
  Vector e = Vector::Zero(op.in_dim());
  for (int j = 0; j < op.in_dim(); ++j) {
    e[j] = 1.0;
    out.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return out;
}

/// max over trials of |<Lx,y> - <x,L*y>| / (1 + |<Lx,y>|), x and y standard normal.
inline double adjoint_check(const LinOp& op, int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigurationError("adjoint_check: trials must be >= 1");
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector x = random_normal(op.in_dim(), rng);
    const Vector y = random_normal(op.out_dim(), rng);
    const Vector lx = op.apply(x);
    const Vector lty = op.adjoint(y);
    if (lx.size() != op.out_dim() || lty.size() != op.in_dim())
      throw SpecificationError("adjoint_check: '" + op.tag() + "' returned a vector of the wrong size");
    const double lhs = lx.dot(y);
    const double rhs = x.dot(lty);
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  return worst;
}

struct OpNormEstimate {
  double value = 0.0;
  double upper_bound = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

struct PowerIterationOptions {
  double tol = 1e-9;
  int max_iter = 5000;
  std::uint64_t seed = 42;
  double inflation = 1.01;
};

/// Spectral norm by power iteration on L*L. The returned upper_bound is the
/// estimate inflated by `inflation`, which is what step-size bounds consume.
inline OpNormEstimate operator_norm(const LinOp& op, const PowerIterationOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw ConfigurationError("operator_norm: tol must be positive");
  if (opts.max_iter < 1) throw ConfigurationError("operator_norm: max_iter must be >= 1");

  OpNormEstimate est;
  if (op.is_zero()) {
    est.converged = true;
    return est;
  }
  if (op.is_identity()) {
    est.value = 1.0;
    est.upper_bound = opts.inflation;
    est.converged = true;
    return est;
  }

  std::mt19937_64 rng(opts.seed);
  Vector x = random_normal(op.in_dim(), rng);
  x.normalize();
  double rayleigh = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector lx = op.apply(x);
    const Vector w = op.adjoint(lx);
    if (!lx.allFinite() || !w.allFinite())
      throw NumericError("operator_norm: non-finite value while iterating '" + op.tag() + "'", it);
    const double next = lx.squaredNorm();  // <x, L*L x> with ||x|| = 1
    const double wn = w.norm();
    est.iterations_used = it;
    if (wn == 0.0) {
      // x lies in ker L*L; for a random start this means the operator is zero.
      rayleigh = next;
      est.converged = true;
      break;
    }
    const bool done = it > 1 && std::abs(next - rayleigh) < opts.tol * std::max(next, 1e-300);
    rayleigh = next;
    x = w / wn;
    if (done) {
      est.converged = true;
      break;
    }
  }
  est.value = std::sqrt(std::max(rayleigh, 0.0));
  est.upper_bound = est.value * opts.inflation;
  return est;
}

inline OpNormEstimate operator_norm(const LinOp& op, double tol, int max_iter, std::uint64_t seed) {
  return operator_norm(op, PowerIterationOptions{tol, max_iter, seed});
}

}  // namespace fbf
