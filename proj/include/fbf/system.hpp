#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/linop.hpp"
#include "fbf/prox.hpp"

namespace fbf {

/// Dimensions of the spaces H_i (i < m) and G_k, Y_k, X_k (k < s).
struct SpaceLayout {
  std::vector<int> h_dims;
  std::vector<int> g_dims;
  std::vector<int> y_dims;
  std::vector<int> x_dims;

  std::size_t m() const noexcept { return h_dims.size(); }
  std::size_t s() const noexcept { return g_dims.size(); }
  int total_h() const { return std::accumulate(h_dims.begin(), h_dims.end(), 0); }

  /// Empty string when well formed, otherwise a description of the defect.
  std::string check() const {
    if (y_dims.size() != g_dims.size() || x_dims.size() != g_dims.size())
      return "layout: g_dims, y_dims and x_dims must have the same length";
    if (h_dims.empty() && g_dims.empty()) return "layout: at least one primal or dual block is required";
    for (const auto* v : {&h_dims, &g_dims, &y_dims, &x_dims})
      for (int d : *v)
        if (d < 1) return "layout: every dimension must be >= 1";
    return {};
  }
};

/// Complete description of a coupled system of monotone inclusions:
///
///   z_i - sum_k L_ki^* v_k   in  A_i x_i + C_i(x_1, ..., x_m)
///   sum_i L_ki x_i - r_k     in  (M_k^* B_k M_k)^{-1} v_k + (N_k^* D_k N_k)^{-1} v_k
///
/// L is indexed L[k][i].
struct SystemSpec {
  SpaceLayout layout;
  BlockVector z;
  BlockVector r;
  std::vector<ResolventOp> A;
  LipschitzCoupling C;
  std::vector<ResolventOp> B;
  std::vector<ResolventOp> D;
  std::vector<LinOp> M;
  std::vector<LinOp> N;
  std::vector<std::vector<LinOp>> L;
};

struct SolutionPair {
  BlockVector xbar;  // in H_i
  BlockVector vbar;  // in G_k
};

/// The four block families of the iteration: x1 in H_i, x2 in G_k,
/// v1 in X_k, v2 in Y_k, plus the iteration counter.
struct IterateState {
  BlockVector x1;
  BlockVector x2;
  BlockVector v1;
  BlockVector v2;
  long n = 0;

  static IterateState zeros(const SpaceLayout& lay) {
    return IterateState{zero_blocks(lay.h_dims), zero_blocks(lay.g_dims), zero_blocks(lay.x_dims),
                        zero_blocks(lay.y_dims), 0};
  }

  bool matches(const SpaceLayout& lay) const {
    auto same = [](const BlockVector& b, const std::vector<int>& d) {
      if (b.size() != d.size()) return false;
      for (std::size_t j = 0; j < d.size(); ++j)
        if (b[j].size() != d[j]) return false;
      return true;
    };
    return same(x1, lay.h_dims) && same(x2, lay.g_dims) && same(v1, lay.x_dims) && same(v2, lay.y_dims);
  }
};

struct Violation {
  std::string path;
  std::string message;
};

struct BetaTerms {
  double nu0 = 0.0;
  double sum_nl_sq = 0.0;  // sum_{i,k} ||N_k L_ki||^2
  double max_nm_sq = 0.0;  // max_k (||N_k||^2 + ||M_k||^2)
  double beta() const { return nu0 + std::sqrt(sum_nl_sq + max_nm_sq); }
};

/// Step-size constant nu0 + sqrt(sum ||N_k L_ki||^2 + max_k(||N_k||^2 + ||M_k||^2)),
/// each norm replaced by its power-iteration upper bound.
inline BetaTerms beta_terms(const SystemSpec& spec, const PowerIterationOptions& opts = {}) {
  BetaTerms t;
  t.nu0 = spec.C.nu0;
  for (std::size_t k = 0; k < spec.layout.s(); ++k) {
    for (std::size_t i = 0; i < spec.layout.m(); ++i) {
      const double n = operator_norm(compose(spec.N[k], spec.L[k][i]), opts).upper_bound;
      t.sum_nl_sq += n * n;
    }
    const double nn = operator_norm(spec.N[k], opts).upper_bound;
    const double mm = operator_norm(spec.M[k], opts).upper_bound;
    t.max_nm_sq = std::max(t.max_nm_sq, nn * nn + mm * mm);
  }
  return t;
}

inline double compute_beta(const SystemSpec& spec, const PowerIterationOptions& opts = {}) {
  const double beta = beta_terms(spec, opts).beta();
  if (!(beta > 0.0)) throw HypothesisError("beta = 0: the step-size constant must be strictly positive");
  if (!std::isfinite(beta)) throw HypothesisError("beta is not finite");
  return beta;
}

namespace detail {

inline void check_linop(std::vector<Violation>& out, const std::string& path, const LinOp& op, int in, int outd) {
  if (op.in_dim() != in || op.out_dim() != outd) {
    out.push_back({path, "dimension mismatch: expected " + std::to_string(in) + " -> " + std::to_string(outd) +
                             ", got " + std::to_string(op.in_dim()) + " -> " + std::to_string(op.out_dim())});
    return;
  }
  if (op.is_identity() || op.is_zero()) return;
  const double defect = adjoint_check(op, 10, 42);
  if (!(defect <= 1e-8)) out.push_back({path, "adjoint check failed (defect " + std::to_string(defect) + ")"});
}

inline void check_vec(std::vector<Violation>& out, const std::string& path, const Vector& v, int dim) {
  if (v.size() != dim)
    out.push_back({path, "dimension mismatch: expected " + std::to_string(dim) + ", got " + std::to_string(v.size())});
}

inline void check_res(std::vector<Violation>& out, const std::string& path, const ResolventOp& op, int dim) {
  if (op.dim() != dim)
    out.push_back({path, "dimension mismatch: expected " + std::to_string(dim) + ", got " + std::to_string(op.dim())});
}

}  // namespace detail

/// Stochastic Lipschitz / monotonicity check of the coupling. Returns the
/// violations found over `trials` random pairs.
inline std::vector<Violation> check_coupling(const LipschitzCoupling& C, int trials = 50, std::uint64_t seed = 42) {
  std::vector<Violation> out;
  if (!std::isfinite(C.nu0) || C.nu0 < 0.0) {
    out.push_back({"C.nu0", "Lipschitz constant must be finite and nonnegative"});
    return out;
  }
  std::mt19937_64 rng(seed);
  double worst_ratio = 0.0;
  double worst_mono = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector x = random_normal(C.total_dim, rng);
    const Vector y = random_normal(C.total_dim, rng);
    const Vector d = C.apply(x) - C.apply(y);
    const double dx = (x - y).norm();
    if (d.norm() > C.nu0 * dx * (1.0 + 1e-10) + 1e-10) worst_ratio = std::max(worst_ratio, d.norm() / dx);
    worst_mono = std::min(worst_mono, d.dot(x - y));
  }
  if (worst_ratio > 0.0)
    out.push_back({"C", "Lipschitz violation: observed ratio " + std::to_string(worst_ratio) + " > nu0 = " +
                            std::to_string(C.nu0)});
  if (worst_mono < -1e-10) out.push_back({"C", "monotonicity violation: <Cx - Cy, x - y> = " + std::to_string(worst_mono)});
  return out;
}

/// Empty iff the spec is dimensionally consistent, every linear operator
/// passes the adjoint check at 1e-8, the coupling passes its stochastic
/// checks and beta > 0.
inline std::vector<Violation> validate(const SystemSpec& spec) {
  using detail::check_linop;
  using detail::check_res;
  using detail::check_vec;
  std::vector<Violation> out;
  const auto& lay = spec.layout;
  if (auto msg = lay.check(); !msg.empty()) {
    out.push_back({"layout", msg});
    return out;
  }
  const std::size_t m = lay.m();
  const std::size_t s = lay.s();
  auto sized = [&](const char* name, std::size_t got, std::size_t want) {
    if (got != want) {
      out.push_back({name, "expected " + std::to_string(want) + " entries, got " + std::to_string(got)});
      return false;
    }
    return true;
  };
  bool ok = sized("z", spec.z.size(), m) & sized("A", spec.A.size(), m) & sized("r", spec.r.size(), s) &
            sized("B", spec.B.size(), s) & sized("D", spec.D.size(), s) & sized("M", spec.M.size(), s) &
            sized("N", spec.N.size(), s) & sized("L", spec.L.size(), s);
  if (!ok) return out;
  for (std::size_t k = 0; k < s; ++k)
    if (!sized(("L[" + std::to_string(k) + "]").c_str(), spec.L[k].size(), m)) return out;

  for (std::size_t i = 0; i < m; ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    check_vec(out, "z" + idx, spec.z[i], lay.h_dims[i]);
    check_res(out, "A" + idx, spec.A[i], lay.h_dims[i]);
  }
  if (spec.C.total_dim != lay.total_h() || spec.C.block_dims != lay.h_dims)
    out.push_back({"C", "coupling block structure does not match h_dims"});
  for (std::size_t k = 0; k < s; ++k) {
    const std::string idx = "[" + std::to_string(k) + "]";
    check_vec(out, "r" + idx, spec.r[k], lay.g_dims[k]);
    check_res(out, "B" + idx, spec.B[k], lay.y_dims[k]);
    check_res(out, "D" + idx, spec.D[k], lay.x_dims[k]);
    check_linop(out, "M" + idx, spec.M[k], lay.g_dims[k], lay.y_dims[k]);
    check_linop(out, "N" + idx, spec.N[k], lay.g_dims[k], lay.x_dims[k]);
    for (std::size_t i = 0; i < m; ++i)
      check_linop(out, "L" + idx + "[" + std::to_string(i) + "]", spec.L[k][i], lay.h_dims[i], lay.g_dims[k]);
  }
  if (!out.empty()) return out;

  if (m > 0) {
    auto cv = check_coupling(spec.C);
    out.insert(out.end(), cv.begin(), cv.end());
  }
  const double beta = beta_terms(spec).beta();
  if (!(beta > 0.0) || !std::isfinite(beta)) out.push_back({"beta", "beta must be finite and strictly positive"});
  return out;
}

/// Primal blocks are the x1 blocks; the dual variable of block k is N_k^* v1_k.
inline SolutionPair extract_solution(const IterateState& state, const SystemSpec& spec) {
  if (!state.matches(spec.layout)) throw SpecificationError("extract_solution: state does not match layout");
  SolutionPair sol;
  sol.xbar = state.x1;
  sol.vbar.reserve(spec.layout.s());
  for (std::size_t k = 0; k < spec.layout.s(); ++k) sol.vbar.push_back(spec.N[k].adjoint(state.v1[k]));
  return sol;
}

/// ||M_k^* v2_k - N_k^* v1_k|| over all k (Euclidean norm of the stacked defect).
inline double transversality_defect(const SystemSpec& spec, const IterateState& state) {
  double sq = 0.0;
  for (std::size_t k = 0; k < spec.layout.s(); ++k)
    sq += (spec.M[k].adjoint(state.v2[k]) - spec.N[k].adjoint(state.v1[k])).squaredNorm();
  return std::sqrt(sq);
}

}  // namespace fbf
