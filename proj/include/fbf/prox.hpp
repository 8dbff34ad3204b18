#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/linop.hpp"

namespace fbf {

/// A maximally monotone operator A on R^dim, known only through its
/// resolvent (gamma, x) -> J_{gamma A}(x) = (Id + gamma A)^{-1} x.
class ResolventOp {
 public:
  using Map = std::function<Vector(double, const Vector&)>;

  ResolventOp() = default;
  ResolventOp(int dim, Map resolve, std::string tag) : dim_(dim), resolve_(std::move(resolve)), tag_(std::move(tag)) {
    if (dim < 1) throw SpecificationError("ResolventOp '" + tag_ + "': dim must be positive");
  }

  int dim() const noexcept { return dim_; }
  const std::string& tag() const noexcept { return tag_; }

  Vector resolve(double gamma, const Vector& x) const {
    if (!(gamma > 0.0)) throw ConfigurationError("resolvent '" + tag_ + "': gamma must be positive");
    if (x.size() != dim_)
      throw SpecificationError("resolvent '" + tag_ + "': expects dim " + std::to_string(dim_) + ", got " +
                               std::to_string(x.size()));
    return resolve_(gamma, x);
  }

 private:
  int dim_ = 0;
  Map resolve_;
  std::string tag_;
};

/// J_{gamma A^{-1}}(x) = x - gamma J_{gamma^{-1} A}(gamma^{-1} x).
inline Vector resolvent_of_inverse(const ResolventOp& op, double gamma, const Vector& x) {
  if (!(gamma > 0.0)) throw ConfigurationError("resolvent_of_inverse: gamma must be positive");
  return x - gamma * op.resolve(1.0 / gamma, x / gamma);
}

/// Monotone nu0-Lipschitz operator C = (C_1, ..., C_m) acting on the
/// concatenation of the primal blocks.
struct LipschitzCoupling {
  int total_dim = 0;
  std::vector<int> block_dims;
  std::function<Vector(const Vector&)> map;
  double nu0 = 0.0;

  Vector apply(const Vector& x) const {
    if (x.size() != total_dim) throw SpecificationError("coupling: expects dim " + std::to_string(total_dim));
    Vector out = map(x);
    if (out.size() != total_dim) throw SpecificationError("coupling: returned a vector of the wrong size");
    return out;
  }

  BlockVector apply_blocks(const BlockVector& x) const { return split(apply(concat(x)), block_dims); }

  /// C_i evaluated at the full tuple.
  Vector block(const BlockVector& x, std::size_t i) const { return apply_blocks(x).at(i); }
};

inline LipschitzCoupling gradient_coupling(std::function<Vector(const Vector&)> phi_grad, double nu0,
                                           std::vector<int> block_dims) {
  if (!(nu0 >= 0.0) || !std::isfinite(nu0)) throw ConfigurationError("gradient_coupling: nu0 must be finite and >= 0");
  for (int d : block_dims)
    if (d < 1) throw SpecificationError("gradient_coupling: block dims must be positive");
  LipschitzCoupling c;
  c.total_dim = std::accumulate(block_dims.begin(), block_dims.end(), 0);
  c.block_dims = std::move(block_dims);
  c.map = std::move(phi_grad);
  c.nu0 = nu0;
  return c;
}

inline LipschitzCoupling zero_coupling(std::vector<int> block_dims) {
  const int total = std::accumulate(block_dims.begin(), block_dims.end(), 0);
  return gradient_coupling([total](const Vector&) -> Vector { return Vector::Zero(total); }, 0.0,
                           std::move(block_dims));
}

/// A proper lsc convex function described by its proximity operator, its
/// value, and (when available in closed form) its Fenchel conjugate.
struct ConvexFunction {
  std::string kind;
  ResolventOp prox;
  std::function<double(const Vector&)> value;
  std::function<double(const Vector&)> conjugate;  // empty when not catalog-available

  int dim() const noexcept { return prox.dim(); }
  bool has_conjugate() const noexcept { return static_cast<bool>(conjugate); }
};

/// Convex differentiable function with nu0-Lipschitz gradient.
struct SmoothFunction {
  std::string kind;
  int dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double nu0 = 0.0;
  std::function<double(const Vector&)> conjugate;
};

using Blocks = std::vector<std::vector<int>>;

namespace prox {

inline constexpr double kDefaultFeasibilityTol = 1e-8;

inline Blocks contiguous_blocks(int dim, int block_size) {
  if (block_size < 1 || dim % block_size != 0)
    throw ConfigurationError("contiguous_blocks: block size must divide the dimension");
  Blocks b(dim / block_size);
  for (int i = 0; i < dim; ++i) b[i / block_size].push_back(i);
  return b;
}

/// Group p = {p, p + n, ..., p + (channels - 1) n} where n = dim / channels.
/// Matches channel-stacked layouts such as discrete gradients.
inline Blocks interleaved_blocks(int dim, int channels) {
  if (channels < 1 || dim % channels != 0)
    throw ConfigurationError("interleaved_blocks: channel count must divide the dimension");
  const int n = dim / channels;
  Blocks b(n);
  for (int p = 0; p < n; ++p)
    for (int c = 0; c < channels; ++c) b[p].push_back(p + c * n);
  return b;
}

inline ConvexFunction zero_function(int dim, double tol = kDefaultFeasibilityTol) {
  ConvexFunction f;
  f.kind = "zero_function";
  f.prox = ResolventOp(dim, [](double, const Vector& x) { return x; }, "zero_function");
  f.value = [](const Vector&) { return 0.0; };
  f.conjugate = [tol](const Vector& u) { return u.lpNorm<Eigen::Infinity>() <= tol ? 0.0 : kInfinity; };
  return f;
}

inline ConvexFunction indicator_zero(int dim, double tol = kDefaultFeasibilityTol) {
  ConvexFunction f;
  f.kind = "indicator_zero";
  f.prox = ResolventOp(dim, [dim](double, const Vector&) -> Vector { return Vector::Zero(dim); }, "indicator_zero");
  f.value = [tol](const Vector& x) { return x.lpNorm<Eigen::Infinity>() <= tol ? 0.0 : kInfinity; };
  f.conjugate = [](const Vector&) { return 0.0; };
  return f;
}

/// w . |x|; prox is componentwise soft-thresholding at gamma * w.
inline ConvexFunction l1(Vector weights, double tol = kDefaultFeasibilityTol) {
  if ((weights.array() < 0.0).any()) throw ConfigurationError("l1: weights must be nonnegative");
  const int dim = static_cast<int>(weights.size());
  auto w = std::make_shared<const Vector>(std::move(weights));
  ConvexFunction f;
  f.kind = "l1";
  f.prox = ResolventOp(
      dim,
      [w](double gamma, const Vector& x) -> Vector {
        const Eigen::ArrayXd t = gamma * w->array();
        return (x.array().sign() * (x.array().abs() - t).max(0.0)).matrix();
      },
      "l1");
  f.value = [w](const Vector& x) { return w->dot(x.cwiseAbs()); };
  f.conjugate = [w, tol](const Vector& u) {
    return ((u.array().abs() - w->array()).maxCoeff() <= tol) ? 0.0 : kInfinity;
  };
  return f;
}

inline ConvexFunction l1(int dim, double weight, double tol = kDefaultFeasibilityTol) {
  return l1(Vector::Constant(dim, weight), tol);
}

inline void check_partition(const Blocks& blocks, int dim) {
  std::vector<char> seen(dim, 0);
  for (const auto& b : blocks) {
    if (b.empty()) throw ConfigurationError("group_l12: empty block");
    for (int i : b) {
      if (i < 0 || i >= dim) throw ConfigurationError("group_l12: block index out of range");
      if (seen[i]) throw ConfigurationError("group_l12: blocks overlap at index " + std::to_string(i));
      seen[i] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ConfigurationError("group_l12: blocks do not cover every coordinate");
}

/// weight * sum_b ||x_b||_2 over a partition into blocks.
inline ConvexFunction group_l12(int dim, Blocks blocks, double weight, double tol = kDefaultFeasibilityTol) {
  if (weight < 0.0) throw ConfigurationError("group_l12: weight must be nonnegative");
  check_partition(blocks, dim);
  auto bl = std::make_shared<const Blocks>(std::move(blocks));
  // Flattened copy for the prox hot path: block j is idx[start[j] .. start[j+1]).
  auto flat = std::make_shared<std::pair<std::vector<int>, std::vector<int>>>();
  flat->second.push_back(0);
  for (const auto& b : *bl) {
    flat->first.insert(flat->first.end(), b.begin(), b.end());
    flat->second.push_back(static_cast<int>(flat->first.size()));
  }
  // Channel-interleaved partition (block p = {p, p + K, p + 2K, ...}) gets a contiguous loop.
  int channels = 0;
  {
    const std::size_t nb = bl->size();
    const int c = nb > 0 ? static_cast<int>((*bl)[0].size()) : 0;
    bool strided = c > 0 && static_cast<std::size_t>(c) * nb == static_cast<std::size_t>(dim);
    for (std::size_t j = 0; strided && j < nb; ++j) {
      const auto& b = (*bl)[j];
      if (static_cast<int>(b.size()) != c) strided = false;
      for (int t = 0; strided && t < c; ++t) strided = b[t] == static_cast<int>(j + t * nb);
    }
    if (strided) channels = c;
  }
  ConvexFunction f;
  f.kind = "group_l12";
  f.prox = ResolventOp(
      dim,
      [flat = std::shared_ptr<const std::pair<std::vector<int>, std::vector<int>>>(flat), weight, channels](
          double gamma, const Vector& x) -> Vector {
        const auto& [idx, start] = *flat;
        Vector out(x.size());
        if (channels > 0) {
          const Eigen::Index K = x.size() / channels;
          Vector scale = Vector::Zero(K);
          for (int c = 0; c < channels; ++c) scale += x.segment(c * K, K).array().square().matrix();
          const double gw = gamma * weight;
          for (Eigen::Index p = 0; p < K; ++p) {
            const double nrm = std::sqrt(scale[p]);
            scale[p] = nrm > 0.0 ? std::max(0.0, 1.0 - gw / nrm) : 0.0;
          }
          for (int c = 0; c < channels; ++c) out.segment(c * K, K) = scale.cwiseProduct(x.segment(c * K, K));
          return out;
        }
        for (std::size_t j = 0; j + 1 < start.size(); ++j) {
          double nrm2 = 0.0;
          for (int t = start[j]; t < start[j + 1]; ++t) nrm2 += x[idx[t]] * x[idx[t]];
          const double nrm = std::sqrt(nrm2);
          const double scale = nrm > 0.0 ? std::max(0.0, 1.0 - gamma * weight / nrm) : 0.0;
          for (int t = start[j]; t < start[j + 1]; ++t) out[idx[t]] = scale * x[idx[t]];
        }
        return out;
      },
      "group_l12");
  f.value = [bl, weight](const Vector& x) {
    double s = 0.0;
    for (const auto& b : *bl) {
      double nrm2 = 0.0;
      for (int i : b) nrm2 += x[i] * x[i];
      s += std::sqrt(nrm2);
    }
    return weight * s;
  };
  f.conjugate = [bl, weight, tol](const Vector& u) {
    for (const auto& b : *bl) {
      double nrm2 = 0.0;
      for (int i : b) nrm2 += u[i] * u[i];
      if (std::sqrt(nrm2) > weight + tol) return kInfinity;
    }
    return 0.0;
  };
  return f;
}

/// Indicator of [lo, hi]; the prox is the clamp and does not depend on gamma.
inline ConvexFunction indicator_box(Vector lo, Vector hi, double tol = kDefaultFeasibilityTol) {
  if (lo.size() != hi.size()) throw ConfigurationError("indicator_box: lo/hi size mismatch");
  if ((lo.array() > hi.array()).any()) throw ConfigurationError("indicator_box: lo must be <= hi");
  const int dim = static_cast<int>(lo.size());
  auto l = std::make_shared<const Vector>(std::move(lo));
  auto h = std::make_shared<const Vector>(std::move(hi));
  ConvexFunction f;
  f.kind = "indicator_box";
  f.prox = ResolventOp(
      dim, [l, h](double, const Vector& x) -> Vector { return x.cwiseMax(*l).cwiseMin(*h); }, "indicator_box");
  f.value = [l, h, tol](const Vector& x) {
    const double viol = std::max((*l - x).maxCoeff(), (x - *h).maxCoeff());
    return viol <= tol ? 0.0 : kInfinity;
  };
  f.conjugate = [l, h](const Vector& u) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (u[j] > 0.0) s += std::isfinite((*h)[j]) ? (*h)[j] * u[j] : kInfinity;
      else if (u[j] < 0.0) s += std::isfinite((*l)[j]) ? (*l)[j] * u[j] : kInfinity;
    }
    return s;
  };
  return f;
}

inline ConvexFunction indicator_box(int dim, double lo, double hi, double tol = kDefaultFeasibilityTol) {
  return indicator_box(Vector::Constant(dim, lo), Vector::Constant(dim, hi), tol);
}

/// Indicator of {x : E x = d}. Projection x - E^+(E x - d), with the
/// pseudo-inverse computed once (minimum-norm under rank deficiency).
inline ConvexFunction indicator_affine(const Matrix& E, const Vector& d, double tol = kDefaultFeasibilityTol) {
  if (E.rows() != d.size()) throw ConfigurationError("indicator_affine: E rows must match d");
  if (E.cols() < 1) throw ConfigurationError("indicator_affine: E must have columns");
  struct Data {
    Matrix E;
    Vector d;
    Matrix pinv;
    Matrix row_proj;  // E^+ E, orthogonal projector onto range(E^T)
    Vector x0;        // E^+ d
  };
  auto data = std::make_shared<Data>();
  data->E = E;
  data->d = d;
  data->pinv = Eigen::CompleteOrthogonalDecomposition<Matrix>(E).pseudoInverse();
  data->row_proj = data->pinv * E;
  data->x0 = data->pinv * d;
  std::shared_ptr<const Data> cd = data;
  ConvexFunction f;
  f.kind = "indicator_affine";
  f.prox = ResolventOp(
      static_cast<int>(E.cols()),
      [cd](double, const Vector& x) -> Vector { return x - cd->pinv * (cd->E * x - cd->d); }, "indicator_affine");
  f.value = [cd, tol](const Vector& x) {
    return (cd->E * x - cd->d).lpNorm<Eigen::Infinity>() <= tol ? 0.0 : kInfinity;
  };
  f.conjugate = [cd, tol](const Vector& u) {
    const Vector off = u - cd->row_proj * u;
    if (off.lpNorm<Eigen::Infinity>() > tol * std::max(1.0, u.lpNorm<Eigen::Infinity>())) return kInfinity;
    return u.dot(cd->x0);
  };
  return f;
}

struct FidelityTerm {
  LinOp T;
  Vector r;
  double weight = 1.0;
};

namespace detail {

struct QuadraticData {
  Matrix Q;      // sum w T^T T
  Vector c;      // sum w T^T r
  double kappa;  // 0.5 sum w ||r||^2
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
};

inline std::shared_ptr<const QuadraticData> assemble_quadratic(const std::vector<FidelityTerm>& terms, int dim) {
  auto q = std::make_shared<QuadraticData>();
  q->Q = Matrix::Zero(dim, dim);
  q->c = Vector::Zero(dim);
  q->kappa = 0.0;
  for (const auto& t : terms) {
    if (t.T.in_dim() != dim) throw ConfigurationError("quadratic_fidelity: operator '" + t.T.tag() + "' has wrong input dim");
    if (t.r.size() != t.T.out_dim()) throw ConfigurationError("quadratic_fidelity: observation size mismatch");
    if (t.weight < 0.0) throw ConfigurationError("quadratic_fidelity: weights must be nonnegative");
    const Matrix Tm = materialize(t.T);
    q->Q += t.weight * Tm.transpose() * Tm;
    q->c += t.weight * Tm.transpose() * t.r;
    q->kappa += 0.5 * t.weight * t.r.squaredNorm();
  }
  q->eig.compute(q->Q);
  return q;
}

/// 0.5 (u + c)^T Q^+ (u + c) - kappa when u + c lies in range(Q), else +inf.
inline double quadratic_conjugate(const QuadraticData& q, const Vector& u, double tol) {
  const Vector y = u + q.c;
  const Vector coeffs = q.eig.eigenvectors().transpose() * y;
  const Vector& lam = q.eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  double val = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam[j] > cutoff) val += 0.5 * coeffs[j] * coeffs[j] / lam[j];
    else if (std::abs(coeffs[j]) > tol * std::max(1.0, y.lpNorm<Eigen::Infinity>())) return kInfinity;
  }
  return val - q.kappa;
}

}  // namespace detail

/// 0.5 sum_k w_k ||T_k x - r_k||^2. The prox solves
/// (Id + gamma Q) x+ = x + gamma c by Cholesky. Factorizations for the
/// step sizes in `gamma_hints` are built up front; other step sizes are
/// factorized per call.
inline ConvexFunction quadratic_fidelity(const std::vector<FidelityTerm>& terms, int dim,
                                         const std::vector<double>& gamma_hints = {},
                                         double tol = kDefaultFeasibilityTol) {
  if (dim < 1) throw ConfigurationError("quadratic_fidelity: dim must be positive");
  auto q = detail::assemble_quadratic(terms, dim);
  auto cache = std::make_shared<std::map<double, Eigen::LLT<Matrix>>>();
  auto factor = [q](double gamma) {
    Eigen::LLT<Matrix> llt(Matrix::Identity(q->Q.rows(), q->Q.cols()) + gamma * q->Q);
    if (llt.info() != Eigen::Success)
      throw NumericError("quadratic_fidelity: system matrix is not positive definite", -1);
    return llt;
  };
  for (double g : gamma_hints) cache->emplace(g, factor(g));
  std::shared_ptr<const std::map<double, Eigen::LLT<Matrix>>> ccache = cache;

  ConvexFunction f;
  f.kind = "quadratic_fidelity";
  f.prox = ResolventOp(
      dim,
      [q, ccache, factor](double gamma, const Vector& x) -> Vector {
        const Vector rhs = x + gamma * q->c;
        if (auto it = ccache->find(gamma); it != ccache->end()) return it->second.solve(rhs);
        return factor(gamma).solve(rhs);
      },
      "quadratic_fidelity");
  auto ts = std::make_shared<const std::vector<FidelityTerm>>(terms);
  f.value = [ts](const Vector& x) {
    double s = 0.0;
    for (const auto& t : *ts) s += 0.5 * t.weight * (t.T.apply(x) - t.r).squaredNorm();
    return s;
  };
  f.conjugate = [q, tol](const Vector& u) { return detail::quadratic_conjugate(*q, u, tol); };
  return f;
}

/// scale * inner(x - offset):
///   prox_{gamma scale inner(. - b)}(x) = b + prox_{gamma scale inner}(x - b).
inline ConvexFunction scaled_translated(const ConvexFunction& inner, double scale, Vector offset) {
  if (!(scale > 0.0)) throw ConfigurationError("scaled_translated: scale must be positive");
  if (offset.size() != inner.dim()) throw ConfigurationError("scaled_translated: offset size mismatch");
  auto b = std::make_shared<const Vector>(std::move(offset));
  ConvexFunction f;
  f.kind = "scaled_translated";
  const ResolventOp ip = inner.prox;
  f.prox = ResolventOp(
      inner.dim(), [ip, b, scale](double gamma, const Vector& x) -> Vector { return *b + ip.resolve(gamma * scale, x - *b); },
      "scaled_translated(" + inner.prox.tag() + ")");
  auto iv = inner.value;
  f.value = [iv, b, scale](const Vector& x) { return scale * iv(x - *b); };
  if (inner.conjugate) {
    auto ic = inner.conjugate;
    f.conjugate = [ic, b, scale](const Vector& u) { return scale * ic(u / scale) + u.dot(*b); };
  }
  return f;
}

/// inner + mu ||x||^2 (uniformly convex when mu > 0):
///   prox_{gamma(f + mu||.||^2)}(x) = prox_{gamma f / (1 + 2 gamma mu)}(x / (1 + 2 gamma mu)).
inline ConvexFunction add_squared_norm(const ConvexFunction& inner, double mu) {
  if (mu < 0.0) throw ConfigurationError("add_squared_norm: mu must be nonnegative");
  ConvexFunction f;
  f.kind = inner.kind + "+sqnorm";
  const ResolventOp ip = inner.prox;
  f.prox = ResolventOp(
      inner.dim(),
      [ip, mu](double gamma, const Vector& x) -> Vector {
        const double s = 1.0 + 2.0 * gamma * mu;
        return ip.resolve(gamma / s, x / s);
      },
      inner.prox.tag() + "+sqnorm");
  auto iv = inner.value;
  f.value = [iv, mu](const Vector& x) { return iv(x) + mu * x.squaredNorm(); };
  return f;
}

// ---------------------------------------------------------------------------
// Smooth terms

inline SmoothFunction zero_smooth(int dim, double tol = kDefaultFeasibilityTol) {
  SmoothFunction s;
  s.kind = "zero";
  s.dim = dim;
  s.value = [](const Vector&) { return 0.0; };
  s.gradient = [dim](const Vector&) -> Vector { return Vector::Zero(dim); };
  s.nu0 = 0.0;
  s.conjugate = [tol](const Vector& u) { return u.lpNorm<Eigen::Infinity>() <= tol ? 0.0 : kInfinity; };
  return s;
}

/// 0.5 sum_k w_k ||T_k x - r_k||^2 with nu0 = sum_k w_k ||T_k||^2 (norm upper bounds).
/// The closed-form conjugate is assembled only when `with_conjugate` is set,
/// since it needs a dense eigendecomposition.
inline SmoothFunction smooth_quadratic_fidelity(const std::vector<FidelityTerm>& terms, int dim,
                                                bool with_conjugate = true, double tol = kDefaultFeasibilityTol) {
  SmoothFunction s;
  s.kind = "quadratic_fidelity";
  s.dim = dim;
  auto ts = std::make_shared<const std::vector<FidelityTerm>>(terms);
  for (const auto& t : terms) {
    if (t.T.in_dim() != dim) throw ConfigurationError("smooth quadratic_fidelity: operator '" + t.T.tag() + "' has wrong input dim");
    if (t.r.size() != t.T.out_dim()) throw ConfigurationError("smooth quadratic_fidelity: observation size mismatch");
    if (t.weight < 0.0) throw ConfigurationError("smooth quadratic_fidelity: weights must be nonnegative");
    const double nrm = operator_norm(t.T).upper_bound;
    s.nu0 += t.weight * nrm * nrm;
  }
  s.value = [ts](const Vector& x) {
    double v = 0.0;
    for (const auto& t : *ts) v += 0.5 * t.weight * (t.T.apply(x) - t.r).squaredNorm();
    return v;
  };
  s.gradient = [ts, dim](const Vector& x) -> Vector {
    Vector g = Vector::Zero(dim);
    for (const auto& t : *ts) g += t.weight * t.T.adjoint(t.T.apply(x) - t.r);
    return g;
  };
  if (with_conjugate) {
    auto q = detail::assemble_quadratic(terms, dim);
    s.conjugate = [q, tol](const Vector& u) { return detail::quadratic_conjugate(*q, u, tol); };
  }
  return s;
}

}  // namespace prox
}  // namespace fbf
