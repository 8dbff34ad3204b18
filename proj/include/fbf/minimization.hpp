#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/linop.hpp"
#include "fbf/prox.hpp"
#include "fbf/system.hpp"

namespace fbf {

/// Convex minimization data:
///
///   minimize  sum_k ((ell_k o N_k) [] (g_k o M_k))(sum_i L_ki x_i - r_k)
///           + sum_i (f_i(x_i) - <x_i, z_i>) + phi(x_1, ..., x_m)
///
/// where [] is infimal convolution.
struct MinimizationSpec {
  SpaceLayout layout;
  std::vector<ConvexFunction> f;    // on H_i
  SmoothFunction phi;               // on H_1 x ... x H_m
  std::vector<ConvexFunction> g;    // on Y_k
  std::vector<ConvexFunction> ell;  // on X_k
  std::vector<LinOp> M;
  std::vector<LinOp> N;
  std::vector<std::vector<LinOp>> L;  // L[k][i]
  BlockVector z;
  BlockVector r;
};

/// Subdifferential mapping: A_i = df_i, C = grad phi, B_k = dg_k, D_k = dell_k.
inline SystemSpec build_system(const MinimizationSpec& ms) {
  if (auto msg = ms.layout.check(); !msg.empty()) throw ConfigurationError(msg);
  if (ms.f.size() != ms.layout.m() || ms.g.size() != ms.layout.s() || ms.ell.size() != ms.layout.s())
    throw ConfigurationError("build_system: function counts do not match the layout");
  if (!ms.phi.gradient || ms.phi.dim != ms.layout.total_h())
    throw ConfigurationError("build_system: smooth term missing or of the wrong dimension");
  auto need_prox = [](const ConvexFunction& fn, const std::string& where) {
    if (fn.prox.dim() < 1) throw ConfigurationError("build_system: " + where + " has no proximity operator");
    return fn.prox;
  };
  SystemSpec spec;
  spec.layout = ms.layout;
  spec.z = ms.z;
  spec.r = ms.r;
  for (std::size_t i = 0; i < ms.f.size(); ++i) spec.A.push_back(need_prox(ms.f[i], "f[" + std::to_string(i) + "]"));
  for (std::size_t k = 0; k < ms.g.size(); ++k) {
    spec.B.push_back(need_prox(ms.g[k], "g[" + std::to_string(k) + "]"));
    spec.D.push_back(need_prox(ms.ell[k], "ell[" + std::to_string(k) + "]"));
  }
  spec.C = gradient_coupling(ms.phi.gradient, ms.phi.nu0, ms.layout.h_dims);
  spec.M = ms.M;
  spec.N = ms.N;
  spec.L = ms.L;
  return spec;
}

/// Finite-difference spot check of grad phi and its Lipschitz constant
/// (central differences, step 1e-5 relative).
inline std::vector<Violation> check_smooth(const SmoothFunction& phi, int trials = 10, std::uint64_t seed = 42,
                                           double grad_tol = 1e-6) {
  std::vector<Violation> out;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    const Vector x = random_normal(phi.dim, rng);
    const Vector y = random_normal(phi.dim, rng);
    const Vector gx = phi.gradient(x);
    const Vector gy = phi.gradient(y);
    if ((gx - gy).norm() > phi.nu0 * (x - y).norm() * (1.0 + 1e-10) + 1e-10)
      out.push_back({"phi.nu0", "gradient Lipschitz bound violated"});
    for (int j = 0; j < phi.dim; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (phi.value(xp) - phi.value(xm)) / (2.0 * h);
      if (std::abs(fd - gx[j]) > grad_tol * std::max(1.0, std::abs(gx[j]))) {
        out.push_back({"phi.gradient", "finite-difference mismatch at coordinate " + std::to_string(j)});
        return out;
      }
    }
  }
  return out;
}

/// Value of the primal objective with the infimal convolutions replaced by
/// the explicit split y_k in G_k:
///
///   sum_k [ell_k(N_k(sum_i L_ki x_i - r_k - y_k)) + g_k(M_k y_k)]
///     + sum_i [f_i(x_i) - <x_i, z_i>] + phi(x).
///
/// Upper-bounds the primal objective for every y; +inf when an indicator
/// is violated.
inline double primal_surrogate(const MinimizationSpec& ms, const BlockVector& x, const BlockVector& y) {
  const auto& lay = ms.layout;
  if (x.size() != lay.m() || y.size() != lay.s()) throw SpecificationError("primal_surrogate: block counts do not match");
  double val = 0.0;
  for (std::size_t k = 0; k < lay.s(); ++k) {
    Vector u = -ms.r[k] - y[k];
    for (std::size_t i = 0; i < lay.m(); ++i) u += ms.L[k][i].apply(x[i]);
    val += ms.ell[k].value(ms.N[k].apply(u));
    val += ms.g[k].value(ms.M[k].apply(y[k]));
  }
  for (std::size_t i = 0; i < lay.m(); ++i) val += ms.f[i].value(x[i]) - x[i].dot(ms.z[i]);
  if (lay.m() > 0) val += ms.phi.value(concat(x));
  return val;
}

struct DualEvaluation {
  std::optional<double> value;  // empty when not computable
  std::string reason;
};

namespace detail {

/// (h o K)^*(v) from the catalog conjugate of h. Closed forms exist for
/// K = Id, for h in {0, indicator of {0}} and for surjective K (then
/// (h o K)^*(v) = h^*(u) with K^* u = v, u unique).
inline std::optional<double> composite_conjugate(const ConvexFunction& h, const LinOp& K, const Vector& v,
                                                 std::string& reason, double tol = prox::kDefaultFeasibilityTol) {
  if (K.is_identity()) {
    if (!h.has_conjugate()) {
      reason = "no closed-form conjugate for '" + h.kind + "'";
      return std::nullopt;
    }
    return h.conjugate(v);
  }
  const double scale = std::max(1.0, v.lpNorm<Eigen::Infinity>());
  if (h.kind == "zero_function") return v.lpNorm<Eigen::Infinity>() <= tol ? 0.0 : kInfinity;
  const Matrix Km = materialize(K);
  if (h.kind == "indicator_zero") {
    // (iota_{0} o K)^* = iota_{range K^*}
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Km.transpose());
    const Vector u = cod.solve(v);
    return (Km.transpose() * u - v).lpNorm<Eigen::Infinity>() <= tol * scale ? 0.0 : kInfinity;
  }
  if (!h.has_conjugate()) {
    reason = "no closed-form conjugate for '" + h.kind + "'";
    return std::nullopt;
  }
  Eigen::FullPivLU<Matrix> lu(Km);
  if (lu.rank() < Km.rows()) {
    reason = "conjugate of '" + h.kind + "' composed with non-surjective '" + K.tag() + "' is not catalog-expressible";
    return std::nullopt;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Km.transpose());
  const Vector u = cod.solve(v);
  if ((Km.transpose() * u - v).lpNorm<Eigen::Infinity>() > tol * scale) return kInfinity;
  return h.conjugate(u);
}

}  // namespace detail

/// Dual value at v in G_k, reported as the negated dual objective so that
/// weak duality reads primal_surrogate >= dual_surrogate. The infimal
/// convolution phi^* [] sum f_i^* is bounded through the split point w
/// (w in H_1 x ... x H_m, concatenated):
///
///   -[ phi^*(w) + sum_i f_i^*(z_i - sum_k L_ki^* v_k - w_i)
///      + sum_k ((ell_k o N_k)^*(v_k) + (g_k o M_k)^*(v_k) + <v_k, r_k>) ].
inline DualEvaluation dual_surrogate(const MinimizationSpec& ms, const BlockVector& v, const Vector& w) {
  const auto& lay = ms.layout;
  if (v.size() != lay.s() || w.size() != lay.total_h())
    throw SpecificationError("dual_surrogate: block counts do not match");
  DualEvaluation out;
  double obj = 0.0;
  if (lay.m() > 0) {
    if (!ms.phi.conjugate) {
      out.reason = "no closed-form conjugate for smooth term '" + ms.phi.kind + "'";
      return out;
    }
    obj += ms.phi.conjugate(w);
    const BlockVector wb = split(w, lay.h_dims);
    for (std::size_t i = 0; i < lay.m(); ++i) {
      if (!ms.f[i].has_conjugate()) {
        out.reason = "no closed-form conjugate for f[" + std::to_string(i) + "] ('" + ms.f[i].kind + "')";
        return out;
      }
      Vector u = ms.z[i] - wb[i];
      for (std::size_t k = 0; k < lay.s(); ++k) u -= ms.L[k][i].adjoint(v[k]);
      obj += ms.f[i].conjugate(u);
    }
  }
  for (std::size_t k = 0; k < lay.s(); ++k) {
    auto a = detail::composite_conjugate(ms.ell[k], ms.N[k], v[k], out.reason);
    if (!a) return out;
    auto b = detail::composite_conjugate(ms.g[k], ms.M[k], v[k], out.reason);
    if (!b) return out;
    obj += *a + *b + v[k].dot(ms.r[k]);
  }
  out.value = -obj;
  return out;
}

}  // namespace fbf
