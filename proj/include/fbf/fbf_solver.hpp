#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/system.hpp"

namespace fbf {

// ---------------------------------------------------------------------------
// Step policy

struct StepInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double g) const noexcept { return g >= lo && g <= hi; }
};

inline double default_epsilon(double beta) { return std::min(0.01, 0.5 / (beta + 1.0)); }

/// Admissible steps gamma_n in [eps, (1 - eps) / beta] with eps in ]0, 1/(beta + 1)[.
class StepPolicy {
 public:
  StepPolicy(double beta, double epsilon, std::vector<double> gammas)
      : beta_(beta), epsilon_(epsilon), gammas_(std::move(gammas)) {}

  double beta() const noexcept { return beta_; }
  double epsilon() const noexcept { return epsilon_; }
  StepInterval interval() const noexcept { return {epsilon_, (1.0 - epsilon_) / beta_}; }
  bool is_constant() const noexcept { return gammas_.size() == 1; }

  /// gamma_n; a user sequence keeps its last value once exhausted.
  double gamma(long n) const {
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(std::max(0L, n)), gammas_.size() - 1);
    return gammas_[idx];
  }

 private:
  double beta_;
  double epsilon_;
  std::vector<double> gammas_;
};

inline void check_epsilon(double beta, double epsilon) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw HypothesisError("step policy: beta must be finite and > 0");
  if (!(epsilon > 0.0) || !(epsilon < 1.0 / (beta + 1.0)))
    throw ConfigurationError("step policy: epsilon = " + std::to_string(epsilon) + " must lie in ]0, 1/(beta+1)[ = ]0, " +
                             std::to_string(1.0 / (beta + 1.0)) + "[");
}

/// Constant step policy; defaults to gamma = (1 - eps) / beta.
inline StepPolicy make_policy(double beta, double epsilon, std::optional<double> gamma_const = std::nullopt) {
  check_epsilon(beta, epsilon);
  const StepInterval iv{epsilon, (1.0 - epsilon) / beta};
  const double g = gamma_const.value_or(iv.hi);
  if (!iv.contains(g))
    throw StepBoundError("step bound violated: gamma = " + std::to_string(g) + " outside [" + std::to_string(iv.lo) +
                         ", " + std::to_string(iv.hi) + "] = [eps, (1-eps)/beta]");
  return StepPolicy(beta, epsilon, {g});
}

/// Policy following a user sequence; every entry is checked up front.
inline StepPolicy make_policy(double beta, double epsilon, std::vector<double> gammas) {
  check_epsilon(beta, epsilon);
  if (gammas.empty()) throw ConfigurationError("step policy: empty gamma sequence");
  const StepInterval iv{epsilon, (1.0 - epsilon) / beta};
  for (std::size_t n = 0; n < gammas.size(); ++n)
    if (!iv.contains(gammas[n]))
      throw StepBoundError("step bound violated: gamma_" + std::to_string(n) + " = " + std::to_string(gammas[n]) +
                           " outside [" + std::to_string(iv.lo) + ", " + std::to_string(iv.hi) + "]");
  return StepPolicy(beta, epsilon, std::move(gammas));
}

// ---------------------------------------------------------------------------
// Error sequences

/// Where an error term enters the iteration. The letter is the role
/// (a: forward evaluation of s/p, b: resolvent output, c: corrector), the
/// digits name the block family.
enum class ErrorSite : int { a11, b11, c11, a12, c12, a21, b21, c21, a22, b22, c22 };
inline constexpr int kErrorSiteCount = 11;

inline const char* to_string(ErrorSite s) {
  static constexpr std::array<const char*, kErrorSiteCount> names{"a11", "b11", "c11", "a12", "c12", "a21",
                                                                  "b21", "c21", "a22", "b22", "c22"};
  return names[static_cast<int>(s)];
}

/// Error vectors injected at one iteration; an empty family means zero.
struct ErrorSample {
  std::array<BlockVector, kErrorSiteCount> sites;

  const Vector* get(ErrorSite s, std::size_t idx) const {
    const auto& b = sites[static_cast<int>(s)];
    return idx < b.size() ? &b[idx] : nullptr;
  }
};

struct ErrorSchedule {
  std::string description = "zero";
  /// (n, site, block index, dim) -> error vector; empty for the zero schedule.
  std::function<Vector(long, ErrorSite, std::size_t, int)> generator;

  bool is_zero() const noexcept { return !generator; }

  ErrorSample sample(long n, const SpaceLayout& lay) const {
    ErrorSample out;
    if (!generator) return out;
    auto fill = [&](ErrorSite site, const std::vector<int>& dims) {
      auto& fam = out.sites[static_cast<int>(site)];
      fam.reserve(dims.size());
      for (std::size_t j = 0; j < dims.size(); ++j) fam.push_back(generator(n, site, j, dims[j]));
    };
    fill(ErrorSite::a11, lay.h_dims);
    fill(ErrorSite::b11, lay.h_dims);
    fill(ErrorSite::c11, lay.h_dims);
    fill(ErrorSite::a12, lay.g_dims);
    fill(ErrorSite::c12, lay.g_dims);
    fill(ErrorSite::a21, lay.x_dims);
    fill(ErrorSite::b21, lay.x_dims);
    fill(ErrorSite::c21, lay.x_dims);
    fill(ErrorSite::a22, lay.y_dims);
    fill(ErrorSite::b22, lay.y_dims);
    fill(ErrorSite::c22, lay.y_dims);
    return out;
  }
};

inline ErrorSchedule zero_errors() { return {}; }

/// amplitude * rho^n * (unit-norm random direction). Summable for rho < 1.
/// Each (n, site, block) draw comes from its own seeded stream, so the
/// sequence does not depend on evaluation order or on the other blocks.
inline ErrorSchedule geometric_errors(double rho, double amplitude, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigurationError("geometric errors: rho must lie in [0, 1)");
  if (!(amplitude >= 0.0)) throw ConfigurationError("geometric errors: amplitude must be >= 0");
  ErrorSchedule s;
  s.description = "geometric(rho=" + std::to_string(rho) + ", amplitude=" + std::to_string(amplitude) + ")";
  s.generator = [rho, amplitude, seed](long n, ErrorSite site, std::size_t idx, int dim) -> Vector {
    const double scale = amplitude * std::pow(rho, static_cast<double>(n));
    std::uint64_t key = mix_seed(seed, static_cast<std::uint64_t>(n));
    key = mix_seed(key, static_cast<std::uint64_t>(site));
    key = mix_seed(key, idx);
    std::mt19937_64 rng(key);
    Vector v = random_normal(dim, rng);
    const double nrm = v.norm();
    return nrm > 0.0 ? Vector(scale * v / nrm) : Vector(Vector::Zero(dim));
  };
  return s;
}

// ---------------------------------------------------------------------------
// One iteration

struct TraceRecord {
  long n = 0;
  double gamma = 0.0;
  double displacement = 0.0;
  /// ||x1 - p11||, ||x2 - p12||, ||v1 - p21||, ||v2 - p22||
  std::array<double, 4> block_displacements{};
  /// running sums of the squared block displacements
  std::array<double, 4> partial_sums{};
  double transversality_defect = 0.0;
};

struct StepOutcome {
  IterateState state;
  TraceRecord record;  // partial_sums hold this step's squares only
};

namespace detail {

inline void add_error(Vector& v, const ErrorSample& e, ErrorSite site, std::size_t idx) {
  if (const Vector* err = e.get(site, idx)) v += *err;
}

// Any inf or nan entry makes the sum non-finite.
inline void require_finite(const Vector& v, const char* line, std::size_t idx, long n) {
  if (!std::isfinite(v.sum()))
    throw NumericError(std::string("non-finite value in ") + line + "[" + std::to_string(idx) + "]", n);
}

}  // namespace detail

/// One forward-backward-forward iteration. The evaluation order is the
/// reference order: primal predictor (i-loop), the dual and auxiliary
/// blocks (k-loop, v1 lines before v2 lines, x2 last), then the primal
/// corrector (i-loop).
inline StepOutcome step(const SystemSpec& spec, const IterateState& st, double gamma, const ErrorSample& err,
                        StepInterval admissible, bool with_defect = true) {
  using detail::add_error;
  using detail::require_finite;
  if (!admissible.contains(gamma))
    throw StepBoundError("step bound violated: gamma = " + std::to_string(gamma) + " outside [" +
                         std::to_string(admissible.lo) + ", " + std::to_string(admissible.hi) + "]");
  const auto& lay = spec.layout;
  if (!st.matches(lay)) throw SpecificationError("step: state does not match layout");
  const std::size_t m = lay.m();
  const std::size_t s = lay.s();
  const long n = st.n;

  // sum_k L_ki^* u_k with u_k = N_k^* v1_k or N_k^* p21_k (each adjoint image is formed once).
  auto dual_to_primal = [&](const BlockVector& nw, std::size_t i) {
    Vector acc = Vector::Zero(lay.h_dims[i]);
    for (std::size_t k = 0; k < s; ++k) acc += spec.L[k][i].adjoint(nw[k]);
    return acc;
  };
  auto adjoint_n = [&](const BlockVector& w) {
    BlockVector out(s);
    for (std::size_t k = 0; k < s; ++k) out[k] = spec.N[k].adjoint(w[k]);
    return out;
  };
  const BlockVector nv1 = adjoint_n(st.v1);

  // Primal predictor.
  BlockVector s11(m), p11(m);
  {
    const BlockVector cx = m > 0 ? spec.C.apply_blocks(st.x1) : BlockVector{};
    for (std::size_t i = 0; i < m; ++i) {
      Vector fwd = cx[i] + dual_to_primal(nv1, i);
      add_error(fwd, err, ErrorSite::a11, i);
      s11[i] = st.x1[i] - gamma * fwd;
      p11[i] = spec.A[i].resolve(gamma, s11[i] + gamma * spec.z[i]);
      add_error(p11[i], err, ErrorSite::b11, i);
      require_finite(p11[i], "p11", i, n);
    }
  }

  IterateState next;
  next.n = n + 1;
  next.x1.resize(m);
  next.x2.resize(s);
  next.v1.resize(s);
  next.v2.resize(s);

  BlockVector p12(s), p21(s), p22(s), np21(s);
  double d_x2 = 0.0, d_v1 = 0.0, d_v2 = 0.0;
  for (std::size_t k = 0; k < s; ++k) {
    const LinOp& Mk = spec.M[k];
    const LinOp& Nk = spec.N[k];

    Vector t12 = nv1[k] - Mk.adjoint(st.v2[k]);
    add_error(t12, err, ErrorSite::a12, k);
    p12[k] = st.x2[k] + gamma * t12;

    // sum_i N_k L_ki x1_i - N_k x2_k, with N_k applied once by linearity.
    Vector lx = Vector::Zero(lay.g_dims[k]);
    for (std::size_t i = 0; i < m; ++i) lx += spec.L[k][i].apply(st.x1[i]);
    Vector t21 = Nk.apply(lx - st.x2[k]);
    add_error(t21, err, ErrorSite::a21, k);
    const Vector s21 = st.v1[k] + gamma * t21;

    // s - gamma (N r + J_{gamma^{-1} D}(gamma^{-1} s - N r)): resolvent of D^{-1}
    // through the inverse-resolvent identity.
    const Vector nr = spec.r[k].isZero(0.0) ? Vector(Vector::Zero(lay.x_dims[k])) : Vector(Nk.apply(spec.r[k]));
    Vector back21 = nr + spec.D[k].resolve(1.0 / gamma, s21 / gamma - nr);
    add_error(back21, err, ErrorSite::b21, k);
    p21[k] = s21 - gamma * back21;
    require_finite(p21[k], "p21", k, n);

    Vector lp = Vector::Zero(lay.g_dims[k]);
    for (std::size_t i = 0; i < m; ++i) lp += spec.L[k][i].apply(p11[i]);
    Vector c21 = Nk.apply(lp - p12[k]);
    add_error(c21, err, ErrorSite::c21, k);
    const Vector q21 = p21[k] + gamma * c21;
    next.v1[k] = st.v1[k] - s21 + q21;

    Vector t22 = Mk.apply(st.x2[k]);
    add_error(t22, err, ErrorSite::a22, k);
    const Vector s22 = st.v2[k] + gamma * t22;
    Vector back22 = spec.B[k].resolve(1.0 / gamma, s22 / gamma);
    add_error(back22, err, ErrorSite::b22, k);
    p22[k] = s22 - gamma * back22;
    require_finite(p22[k], "p22", k, n);

    Vector c22 = Mk.apply(p12[k]);
    add_error(c22, err, ErrorSite::c22, k);
    const Vector q22 = p22[k] + gamma * c22;
    next.v2[k] = st.v2[k] - s22 + q22;

    np21[k] = Nk.adjoint(p21[k]);
    Vector c12 = np21[k] - Mk.adjoint(p22[k]);
    add_error(c12, err, ErrorSite::c12, k);
    const Vector q12 = p12[k] + gamma * c12;
    next.x2[k] = st.x2[k] - p12[k] + q12;

    require_finite(next.v1[k], "v1", k, n);
    require_finite(next.v2[k], "v2", k, n);
    require_finite(next.x2[k], "x2", k, n);
    d_x2 += (st.x2[k] - p12[k]).squaredNorm();
    d_v1 += (st.v1[k] - p21[k]).squaredNorm();
    d_v2 += (st.v2[k] - p22[k]).squaredNorm();
  }

  // Primal corrector; C is evaluated at the full p11 tuple.
  double d_x1 = 0.0;
  {
    const BlockVector cp = m > 0 ? spec.C.apply_blocks(p11) : BlockVector{};
    for (std::size_t i = 0; i < m; ++i) {
      Vector fwd = cp[i] + dual_to_primal(np21, i);
      add_error(fwd, err, ErrorSite::c11, i);
      const Vector q11 = p11[i] - gamma * fwd;
      next.x1[i] = st.x1[i] - s11[i] + q11;
      require_finite(next.x1[i], "x1", i, n);
      d_x1 += (st.x1[i] - p11[i]).squaredNorm();
    }
  }

  TraceRecord rec;
  rec.n = n;
  rec.gamma = gamma;
  double disp = 0.0;
  for (std::size_t i = 0; i < m; ++i) disp += (next.x1[i] - st.x1[i]).squaredNorm();
  for (std::size_t k = 0; k < s; ++k)
    disp += (next.x2[k] - st.x2[k]).squaredNorm() + (next.v1[k] - st.v1[k]).squaredNorm() +
            (next.v2[k] - st.v2[k]).squaredNorm();
  rec.displacement = std::sqrt(disp);
  rec.block_displacements = {std::sqrt(d_x1), std::sqrt(d_x2), std::sqrt(d_v1), std::sqrt(d_v2)};
  rec.partial_sums = {d_x1, d_x2, d_v1, d_v2};
  rec.transversality_defect = with_defect ? transversality_defect(spec, next) : 0.0;
  return {std::move(next), rec};
}

/// Norm of the full-state displacement produced by one exact (error-free)
/// iteration. Zero exactly at fixed points, which are the solutions of the
/// embedded inclusion. Requires 0 < gamma < 1 / beta.
inline double fixed_point_residual(const SystemSpec& spec, const IterateState& state, double gamma, double beta) {
  if (!(gamma > 0.0) || !(gamma < 1.0 / beta))
    throw StepBoundError("fixed_point_residual: gamma = " + std::to_string(gamma) + " outside ]0, 1/beta[");
  return step(spec, state, gamma, ErrorSample{}, {gamma, gamma}).record.displacement;
}

inline double fixed_point_residual(const SystemSpec& spec, const IterateState& state, double gamma) {
  return fixed_point_residual(spec, state, gamma, compute_beta(spec));
}

// ---------------------------------------------------------------------------
// Driver

enum class SolveStatus { converged, max_iter, numeric_error };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numeric_error: return "numeric_error";
  }
  return "unknown";
}

struct StopRule {
  double tol = 1e-8;
  long max_iter = 100000;
  long trace_every = 1;
};

struct SolveResult {
  IterateState final_state;
  std::vector<TraceRecord> trace;
  SolveStatus status = SolveStatus::max_iter;
  long iterations = 0;
  double final_displacement = kInfinity;
  double transversality_defect = 0.0;
  std::array<double, 4> partial_sums{};
  std::string message;
};

/// Called after every iteration with the new state and its record.
using IterationObserver = std::function<void(const IterateState&, const TraceRecord&)>;

/// Iterates until the one-step displacement is <= tol or max_iter steps
/// have been taken. Numeric failures end the run with status numeric_error
/// and the last finite state.
inline SolveResult solve(const SystemSpec& spec, const IterateState& init, const StepPolicy& policy,
                         const ErrorSchedule& errors, const StopRule& stop, const IterationObserver& observer = {}) {
  if (stop.trace_every < 1) throw ConfigurationError("solve: trace_every must be >= 1");
  if (stop.max_iter < 0) throw ConfigurationError("solve: max_iter must be >= 0");
  if (!init.matches(spec.layout)) throw SpecificationError("solve: initial state does not match layout");
  const StepInterval iv = policy.interval();
  if (!iv.contains(policy.gamma(init.n)))
    throw StepBoundError("step bound violated before iteration 0: gamma outside [eps, (1-eps)/beta]");

  SolveResult res;
  res.final_state = init;
  res.transversality_defect = transversality_defect(spec, init);
  IterateState cur = init;
  std::array<double, 4> sums{};
  TraceRecord last;
  bool have_last = false;
  bool last_recorded = false;
  for (long it = 0; it < stop.max_iter; ++it) {
    StepOutcome out;
    try {
      const ErrorSample e = errors.sample(cur.n, spec.layout);
      out = step(spec, cur, policy.gamma(cur.n), e, iv, false);
    } catch (const NumericError& ex) {
      res.status = SolveStatus::numeric_error;
      res.message = ex.what();
      break;
    }
    for (int j = 0; j < 4; ++j) sums[j] += out.record.partial_sums[j];
    out.record.partial_sums = sums;
    cur = std::move(out.state);
    res.iterations = it + 1;
    last = out.record;
    have_last = true;
    last_recorded = false;
    const bool done = last.displacement <= stop.tol;
    const bool keep = (it + 1) % stop.trace_every == 0 || done;
    // The defect is only formed for records that are observed or kept.
    if (observer || keep || it + 1 == stop.max_iter) last.transversality_defect = transversality_defect(spec, cur);
    if (observer) observer(cur, last);
    if (keep) {
      res.trace.push_back(last);
      last_recorded = true;
    }
    if (done) {
      res.status = SolveStatus::converged;
      break;
    }
  }
  if (have_last && !last_recorded) res.trace.push_back(last);
  if (have_last) {
    res.final_displacement = last.displacement;
    res.transversality_defect = last.transversality_defect;
  }
  res.partial_sums = sums;
  res.final_state = std::move(cur);
  return res;
}

}  // namespace fbf
