#pragma once

// Brute-force references for tests. Nothing here touches the solver, the
// operator classes or the prox catalog; only plain Eigen storage is shared.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "fbf/core.hpp"

namespace fbf::oracle {

struct GridResult {
  Vector argmin;
  double value = kInfinity;
  std::vector<double> level_values;  // best value after each pass
};

/// Nested grid search on a box in dims 1..3: 41 points per axis, recenter on
/// the best point, shrink the half-width by 4, `levels` refinements after the
/// initial pass. Points are kept inside the original box.
inline GridResult grid_refine_minimize(const std::function<double(const Vector&)>& objective, const Vector& lo,
                                       const Vector& hi, int levels) {
  const int dim = static_cast<int>(lo.size());
  if (dim < 1 || dim > 3 || hi.size() != lo.size()) throw OracleError("grid_refine_minimize: dims must be 1, 2 or 3");
  if (levels < 0) throw OracleError("grid_refine_minimize: levels must be >= 0");
  for (int d = 0; d < dim; ++d)
    if (!(lo[d] <= hi[d])) throw OracleError("grid_refine_minimize: empty box");
  constexpr int kPts = 41;

  GridResult res;
  Vector center = 0.5 * (lo + hi);
  Vector half = 0.5 * (hi - lo);
  for (int level = 0; level <= levels; ++level) {
    int idx[3] = {0, 0, 0};
    const long total = static_cast<long>(std::pow(kPts, dim));
    Vector best_here = center;
    double best_val = res.value;
    Vector x(dim);
    for (long t = 0; t < total; ++t) {
      long rem = t;
      for (int d = 0; d < dim; ++d) {
        idx[d] = static_cast<int>(rem % kPts);
        rem /= kPts;
      }
      for (int d = 0; d < dim; ++d)
        x[d] = std::clamp(center[d] + half[d] * (-1.0 + 2.0 * idx[d] / (kPts - 1)), lo[d], hi[d]);
      const double v = objective(x);
      if (v < best_val) {
        best_val = v;
        best_here = x;
      }
    }
    if (best_val < res.value) {
      res.value = best_val;
      res.argmin = best_here;
    }
    res.level_values.push_back(res.value);
    if (res.value == kInfinity) throw OracleError("grid_refine_minimize: objective is +inf on the whole grid");
    center = res.argmin;
    half /= 4.0;
  }
  return res;
}

inline GridResult grid_refine_minimize(const std::function<double(const Vector&)>& objective, double lo, double hi,
                                       int dim, int levels) {
  return grid_refine_minimize(objective, Vector::Constant(dim, lo), Vector::Constant(dim, hi), levels);
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline Vector gauss_solve(Matrix A, Vector b) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || b.size() != n) throw OracleError("gauss_solve: shape mismatch");
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(A(i, j)));
  if (scale == 0.0) throw OracleError("gauss_solve: zero matrix");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(A(i, col)) > std::abs(A(piv, col))) piv = i;
    if (std::abs(A(piv, col)) <= 1e-13 * scale) throw OracleError("gauss_solve: singular matrix");
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A(col, j), A(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (int i = col + 1; i < n; ++i) {
      const double f = A(i, col) / A(col, col);
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) A(i, j) -= f * A(col, j);
      b[i] -= f * b[col];
    }
  }
  Vector x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

/// argmin 0.5 x^T Q x + c^T x subject to E x = d, from the KKT system
/// [Q E^T; E 0] [x; lambda] = [-c; d]. E may have zero rows.
inline Vector kkt_quadratic_solve(const Matrix& Q, const Vector& c, const Matrix& E, const Vector& d) {
  const int n = static_cast<int>(Q.rows());
  const int p = static_cast<int>(E.rows());
  if (Q.cols() != n || c.size() != n || (p > 0 && E.cols() != n) || d.size() != p)
    throw OracleError("kkt_quadratic_solve: shape mismatch");
  Matrix K = Matrix::Zero(n + p, n + p);
  Vector rhs(n + p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) K(i, j) = Q(i, j);
    rhs[i] = -c[i];
  }
  for (int a = 0; a < p; ++a) {
    for (int j = 0; j < n; ++j) {
      K(n + a, j) = E(a, j);
      K(j, n + a) = E(a, j);
    }
    rhs[n + a] = d[a];
  }
  try {
    return gauss_solve(K, rhs).head(n);
  } catch (const OracleError&) {
    throw OracleError("kkt_quadratic_solve: singular KKT matrix");
  }
}

/// Largest singular value: cyclic Jacobi eigenvalue sweeps on the smaller
/// Gram matrix until the off-diagonal mass is below 1e-12 relative.
inline double dense_svd_norm(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  if (A.rows() > 256 || A.cols() > 256) throw OracleError("dense_svd_norm: dims must be <= 256");
  const bool tall = A.rows() >= A.cols();
  const int n = static_cast<int>(tall ? A.cols() : A.rows());
  Matrix S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      if (tall)
        for (Eigen::Index r = 0; r < A.rows(); ++r) s += A(r, i) * A(r, j);
      else
        for (Eigen::Index c = 0; c < A.cols(); ++c) s += A(i, c) * A(j, c);
      S(i, j) = s;
    }
  double diag = 0.0;
  for (int i = 0; i < n; ++i) diag += S(i, i) * S(i, i);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * S(i, j) * S(i, j);
    if (off <= 1e-24 * std::max(diag, 1e-300)) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (S(p, q) == 0.0) continue;
        const double theta = (S(q, q) - S(p, p)) / (2.0 * S(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double skp = S(k, p), skq = S(k, q);
          S(k, p) = c * skp - s * skq;
          S(k, q) = s * skp + c * skq;
        }
        for (int k = 0; k < n; ++k) {
          const double spk = S(p, k), sqk = S(q, k);
          S(p, k) = c * spk - s * sqk;
          S(q, k) = s * spk + c * sqk;
        }
      }
  }
  double lam = 0.0;
  for (int i = 0; i < n; ++i) lam = std::max(lam, S(i, i));
  return std::sqrt(lam);
}

inline double soft_threshold(double x, double t) { return x > t ? x - t : (x < -t ? x + t : 0.0); }

/// Minimizer of 0.5 ||T x - r||^2 + lambda ||x||_1 - <x, z> + mu ||x||^2 for a
/// design with orthonormal columns: soft(T^T r + z, lambda) / (1 + 2 mu).
inline Vector lasso_orthonormal(const Matrix& T, const Vector& r, double lambda, const Vector& z, double mu = 0.0) {
  const int n = static_cast<int>(T.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double g = 0.0;
      for (Eigen::Index k = 0; k < T.rows(); ++k) g += T(k, i) * T(k, j);
      if (std::abs(g - (i == j ? 1.0 : 0.0)) > 1e-10) throw OracleError("lasso_orthonormal: design is not orthonormal");
    }
  Vector x(n);
  for (int i = 0; i < n; ++i) {
    double s = z[i];
    for (Eigen::Index k = 0; k < T.rows(); ++k) s += T(k, i) * r[k];
    x[i] = soft_threshold(s, lambda) / (1.0 + 2.0 * mu);
  }
  return x;
}

}  // namespace fbf::oracle
