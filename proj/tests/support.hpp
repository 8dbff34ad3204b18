#pragma once

#include <random>

#include "fbf/fbf.hpp"

namespace fbf::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index t = 0;
  for (double x : v) out[t++] = x;
  return out;
}

inline double max_abs(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

/// J_{gamma A} for A = d(0.5 ||.||^2): x / (1 + gamma).
inline ResolventOp half_square_resolvent(int dim) {
  return ResolventOp(dim, [](double g, const Vector& x) -> Vector { return x / (1.0 + g); }, "half_square");
}

/// Plain dense transcription of one iteration, line by line, with every
/// operator materialized. Used as an independent reference for `step`.
inline IterateState reference_step(const SystemSpec& sp, const IterateState& st, double g, const ErrorSample& e) {
  const std::size_t m = sp.layout.m(), s = sp.layout.s();
  auto err = [&](ErrorSite site, std::size_t idx, int dim) -> Vector {
    const Vector* p = e.get(site, idx);
    return p ? *p : Vector(Vector::Zero(dim));
  };
  std::vector<Matrix> M(s), N(s);
  std::vector<std::vector<Matrix>> L(s, std::vector<Matrix>(m));
  for (std::size_t k = 0; k < s; ++k) {
    M[k] = materialize(sp.M[k]);
    N[k] = materialize(sp.N[k]);
    for (std::size_t i = 0; i < m; ++i) L[k][i] = materialize(sp.L[k][i]);
  }
  const int H = sp.layout.total_h();
  auto C_at = [&](const BlockVector& x, std::size_t i) -> Vector {
    if (H == 0) return Vector();
    return split(sp.C.map(concat(x)), sp.layout.h_dims)[i];
  };

  BlockVector s11(m), p11(m);
  for (std::size_t i = 0; i < m; ++i) {
    Vector sum = Vector::Zero(sp.layout.h_dims[i]);
    for (std::size_t k = 0; k < s; ++k) sum += L[k][i].transpose() * N[k].transpose() * st.v1[k];
    s11[i] = st.x1[i] - g * (C_at(st.x1, i) + sum + err(ErrorSite::a11, i, sp.layout.h_dims[i]));
    p11[i] = sp.A[i].resolve(g, s11[i] + g * sp.z[i]) + err(ErrorSite::b11, i, sp.layout.h_dims[i]);
  }
  IterateState next = st;
  next.n = st.n + 1;
  BlockVector p21(s);
  for (std::size_t k = 0; k < s; ++k) {
    const int gd = sp.layout.g_dims[k], xd = sp.layout.x_dims[k], yd = sp.layout.y_dims[k];
    const Vector p12 = st.x2[k] + g * (N[k].transpose() * st.v1[k] - M[k].transpose() * st.v2[k] + err(ErrorSite::a12, k, gd));
    Vector lx = Vector::Zero(gd), lp = Vector::Zero(gd);
    for (std::size_t i = 0; i < m; ++i) {
      lx += L[k][i] * st.x1[i];
      lp += L[k][i] * p11[i];
    }
    const Vector s21 = st.v1[k] + g * (N[k] * lx - N[k] * st.x2[k] + err(ErrorSite::a21, k, xd));
    const Vector nr = N[k] * sp.r[k];
    p21[k] = s21 - g * (nr + sp.D[k].resolve(1.0 / g, s21 / g - nr) + err(ErrorSite::b21, k, xd));
    const Vector q21 = p21[k] + g * (N[k] * lp - N[k] * p12 + err(ErrorSite::c21, k, xd));
    next.v1[k] = st.v1[k] - s21 + q21;
    const Vector s22 = st.v2[k] + g * (M[k] * st.x2[k] + err(ErrorSite::a22, k, yd));
    const Vector p22 = s22 - g * (sp.B[k].resolve(1.0 / g, s22 / g) + err(ErrorSite::b22, k, yd));
    const Vector q22 = p22 + g * (M[k] * p12 + err(ErrorSite::c22, k, yd));
    next.v2[k] = st.v2[k] - s22 + q22;
    const Vector q12 = p12 + g * (N[k].transpose() * p21[k] - M[k].transpose() * p22 + err(ErrorSite::c12, k, gd));
    next.x2[k] = st.x2[k] - p12 + q12;
  }
  for (std::size_t i = 0; i < m; ++i) {
    Vector sum = Vector::Zero(sp.layout.h_dims[i]);
    for (std::size_t k = 0; k < s; ++k) sum += L[k][i].transpose() * N[k].transpose() * p21[k];
    const Vector q11 = p11[i] - g * (C_at(p11, i) + sum + err(ErrorSite::c11, i, sp.layout.h_dims[i]));
    next.x1[i] = st.x1[i] - s11[i] + q11;
  }
  return next;
}

/// Random dense system with m = 2 primal and s = 2 dual blocks, nonzero
/// offsets, a quadratic coupling and mixed catalog resolvents.
inline SystemSpec random_system(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SystemSpec sp;
  sp.layout = SpaceLayout{{2, 3}, {3, 2}, {2, 3}, {4, 2}};
  const auto& lay = sp.layout;
  for (int d : lay.h_dims) sp.z.push_back(random_normal(d, rng));
  for (int d : lay.g_dims) sp.r.push_back(random_normal(d, rng));
  sp.A = {prox::l1(2, 0.3).prox, prox::indicator_box(3, -0.5, 0.5).prox};
  sp.B = {prox::group_l12(2, {{0, 1}}, 0.4).prox, prox::l1(3, 0.2).prox};
  sp.D = {prox::indicator_box(4, -1.0, 1.0).prox, prox::zero_function(2).prox};
  const Matrix T = random_normal(4, 5, rng);
  const SmoothFunction phi = prox::smooth_quadratic_fidelity({{dense(T, "T"), random_normal(4, rng), 1.0}}, 5, false);
  sp.C = gradient_coupling(phi.gradient, phi.nu0, lay.h_dims);
  for (std::size_t k = 0; k < lay.s(); ++k) {
    sp.M.push_back(dense(0.5 * random_normal(lay.y_dims[k], lay.g_dims[k], rng), "M"));
    sp.N.push_back(dense(0.5 * random_normal(lay.x_dims[k], lay.g_dims[k], rng), "N"));
    std::vector<LinOp> row;
    for (std::size_t i = 0; i < lay.m(); ++i)
      row.push_back(dense(0.5 * random_normal(lay.g_dims[k], lay.h_dims[i], rng), "L"));
    sp.L.push_back(row);
  }
  return sp;
}

inline IterateState random_state(const SpaceLayout& lay, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  IterateState st = IterateState::zeros(lay);
  for (auto* fam : {&st.x1, &st.x2, &st.v1, &st.v2})
    for (auto& b : *fam) b = random_normal(b.size(), rng);
  return st;
}

inline double state_distance(const IterateState& a, const IterateState& b) {
  double e = 0.0;
  auto fam = [&e](const BlockVector& x, const BlockVector& y) {
    for (std::size_t j = 0; j < x.size(); ++j) e = std::max(e, (x[j] - y[j]).lpNorm<Eigen::Infinity>());
  };
  fam(a.x1, b.x1);
  fam(a.x2, b.x2);
  fam(a.v1, b.v1);
  fam(a.v2, b.v2);
  return e;
}

}  // namespace fbf::testing
