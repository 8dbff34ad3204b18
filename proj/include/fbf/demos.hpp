#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "fbf/core.hpp"
#include "fbf/fbf_solver.hpp"
#include "fbf/imaging.hpp"
#include "fbf/minimization.hpp"
#include "fbf/oracle.hpp"
#include "fbf/prox.hpp"
#include "fbf/system.hpp"

namespace fbf::demos {

/// A ready-to-run instance: the system, its default policy and stopping
/// rule, and whatever reference data is known for it.
struct Demo {
  std::string name;
  std::optional<MinimizationSpec> problem;
  SystemSpec system;
  double beta = 0.0;
  double epsilon = 0.0;
  StepPolicy policy{1.0, 0.01, {0.5}};
  StopRule stop;
  IterateState init;
  BlockVector reference;               // oracle primal solution, when known
  std::optional<IterateState> lifted;  // reference solution lifted to a full state
  std::optional<DeblurData> images;
};

inline void finalize(Demo& d) {
  d.beta = compute_beta(d.system);
  d.epsilon = default_epsilon(d.beta);
  d.policy = make_policy(d.beta, d.epsilon);
  d.init = IterateState::zeros(d.system.layout);
}

struct LassoData {
  Matrix T;  // orthonormal 10 x 10
  Vector r;
  double lambda = 0.3;
};

inline LassoData lasso_data(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x1A550u));
  const int n = 10;
  LassoData d;
  const Matrix G = random_normal(n, n, rng);
  d.T = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(n, n);
  Vector truth = Vector::Zero(n);
  truth[1] = 1.5;
  truth[4] = -2.0;
  truth[7] = 0.8;
  d.r = d.T * truth + 0.2 * random_normal(n, rng);
  return d;
}

/// minimize 0.5 ||T x - r||^2 + lambda ||x||_1 (+ mu ||x||^2), T orthonormal.
/// One inactive dual block (L = M = N = Id, ell = indicator of {0}, g = 0)
/// carries the split u = x, so the lifted solution is (xbar, xbar, 0, 0).
inline Demo lasso(std::uint64_t seed = 42, double mu = 0.0) {
  const LassoData data = lasso_data(seed);
  const int n = static_cast<int>(data.T.cols());
  MinimizationSpec ms;
  ms.layout.h_dims = {n};
  ms.layout.g_dims = {n};
  ms.layout.y_dims = {n};
  ms.layout.x_dims = {n};
  ConvexFunction f = prox::l1(n, data.lambda);
  if (mu > 0.0) f = prox::add_squared_norm(f, mu);
  ms.f = {f};
  ms.phi = prox::smooth_quadratic_fidelity({{dense(data.T, "T"), data.r, 1.0}}, n);
  ms.g = {prox::zero_function(n)};
  ms.ell = {prox::indicator_zero(n)};
  ms.M = {identity(n)};
  ms.N = {identity(n)};
  ms.L = {{identity(n)}};
  ms.z = {Vector::Zero(n)};
  ms.r = {Vector::Zero(n)};

  Demo d;
  d.name = mu > 0.0 ? "lasso_uc" : "lasso";
  d.system = build_system(ms);
  d.problem = std::move(ms);
  finalize(d);
  d.stop = StopRule{1e-8, 100000, 1};
  const Vector xbar = oracle::lasso_orthonormal(data.T, data.r, data.lambda, Vector::Zero(n), mu);
  d.reference = {xbar};
  d.lifted = IterateState{{xbar}, {xbar}, {Vector::Zero(n)}, {Vector::Zero(n)}, 0};
  return d;
}

struct QpData {
  Matrix T1, T2;  // f = 0.5 ||T1 x - r1||^2 (prox), phi = 0.5 ||T2 x - r2||^2 (gradient)
  Vector r1, r2;
  Matrix E;
  Vector d;
};

inline QpData qp_data(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x09u));
  QpData q;
  q.T1 = Matrix::Identity(4, 4) + 0.3 * random_normal(4, 4, rng);
  q.T2 = 0.5 * random_normal(4, 4, rng);
  q.r1 = random_normal(4, rng);
  q.r2 = random_normal(4, rng);
  q.E = random_normal(2, 4, rng);
  q.d = random_normal(2, rng);
  return q;
}

/// minimize 0.5 ||T1 x - r1||^2 + 0.5 ||T2 x - r2||^2 subject to E x = d.
/// The constraint enters as ell = indicator_affine with L = M = N = Id and
/// g = indicator of {0}, so the dual block carries the multiplier E^T lambda.
inline Demo qp(std::uint64_t seed = 42) {
  const QpData q = qp_data(seed);
  const int n = 4;
  MinimizationSpec ms;
  ms.layout.h_dims = {n};
  ms.layout.g_dims = {n};
  ms.layout.y_dims = {n};
  ms.layout.x_dims = {n};
  ms.f = {prox::quadratic_fidelity({{dense(q.T1, "T1"), q.r1, 1.0}}, n)};
  ms.phi = prox::smooth_quadratic_fidelity({{dense(q.T2, "T2"), q.r2, 1.0}}, n);
  ms.g = {prox::indicator_zero(n)};
  ms.ell = {prox::indicator_affine(q.E, q.d)};
  ms.M = {identity(n)};
  ms.N = {identity(n)};
  ms.L = {{identity(n)}};
  ms.z = {Vector::Zero(n)};
  ms.r = {Vector::Zero(n)};

  Demo d;
  d.name = "qp";
  d.system = build_system(ms);
  d.problem = std::move(ms);
  finalize(d);
  d.stop = StopRule{1e-8, 100000, 1};
  const Matrix Q = q.T1.transpose() * q.T1 + q.T2.transpose() * q.T2;
  const Vector c = -(q.T1.transpose() * q.r1 + q.T2.transpose() * q.r2);
  const Vector xbar = oracle::kkt_quadratic_solve(Q, c, q.E, q.d);
  const Vector vbar = -(Q * xbar + c);
  d.reference = {xbar};
  d.lifted = IterateState{{xbar}, {Vector::Zero(n)}, {vbar}, {vbar}, 0};
  return d;
}

struct DeblurOptions {
  int size = 16;
  double sigma = 0.01;
  App1Params params{0.005, 0.05, 0.001, 0.0, 1.0, 1e-5};
};

/// Blurred, noisy phantom restored with the two-regularizer image model.
inline Demo deblur(std::uint64_t seed = 42, const DeblurOptions& opt = {}) {
  DeblurData data = make_deblur_data(opt.size, opt.size, opt.sigma, seed);
  MinimizationSpec ms = build_app1_instance(data.truth, data.obs, opt.params);
  Demo d;
  d.name = "deblur";
  d.system = build_system(ms);
  d.problem = std::move(ms);
  finalize(d);
  d.stop = StopRule{1e-6, 20000, 1};
  d.images = std::move(data);
  return d;
}

// ---------------------------------------------------------------------------
// Separation: with every L_ki = 0 the primal and dual halves decouple.

struct SeparationSpecs {
  SystemSpec coupled;
  SystemSpec primal_only;
  SystemSpec dual_only;
};

inline SeparationSpecs separation_specs(std::uint64_t seed = 42) {
  std::mt19937_64 rng(mix_seed(seed, 0x5E9u));
  const int h = 3, g = 2, y = 2, x = 3;
  const Matrix T = random_normal(4, h, rng);
  const Vector r0 = random_normal(4, rng);
  const Vector z = random_normal(h, rng);
  const Matrix Mm = random_normal(y, g, rng);
  const Matrix Nm = random_normal(x, g, rng);
  const Vector r = random_normal(g, rng);

  const SmoothFunction phi = prox::smooth_quadratic_fidelity({{dense(T, "T"), r0, 1.0}}, h, false);
  SeparationSpecs out;
  SystemSpec& c = out.coupled;
  c.layout = SpaceLayout{{h}, {g}, {y}, {x}};
  c.z = {z};
  c.r = {r};
  c.A = {prox::l1(h, 0.2).prox};
  c.C = gradient_coupling(phi.gradient, phi.nu0, {h});
  c.B = {prox::group_l12(y, {{0, 1}}, 0.5).prox};
  c.D = {prox::indicator_box(x, -0.3, 0.3).prox};
  c.M = {dense(Mm, "M")};
  c.N = {dense(Nm, "N")};
  c.L = {{zero_op(h, g)}};

  SystemSpec& p = out.primal_only;
  p.layout = SpaceLayout{{h}, {}, {}, {}};
  p.z = c.z;
  p.A = c.A;
  p.C = c.C;

  SystemSpec& q = out.dual_only;
  q.layout = SpaceLayout{{}, {g}, {y}, {x}};
  q.r = c.r;
  q.C = zero_coupling({});
  q.B = c.B;
  q.D = c.D;
  q.M = c.M;
  q.N = c.N;
  q.L = {{}};
  return out;
}

struct SeparationReport {
  bool identical = false;
  long iterations = 0;
  long first_mismatch = -1;  // iteration index, -1 when none
  std::string detail;
  SolveResult coupled;
};

namespace detail {

inline bool same_bits(const BlockVector& a, const BlockVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].size() != b[j].size()) return false;
    for (Eigen::Index t = 0; t < a[j].size(); ++t)
      if (!(a[j][t] == b[j][t])) return false;
  }
  return true;
}

}  // namespace detail

/// Runs the coupled system and the two decoupled systems with the same
/// policy and error schedule and compares every iterate coordinate for exact
/// equality (x1 against the primal-only run, x2/v1/v2 against the dual-only run).
inline SeparationReport run_separation(std::uint64_t seed = 42, long iterations = 500,
                                       const ErrorSchedule& errors = geometric_errors(0.9, 0.1, 42)) {
  const SeparationSpecs sp = separation_specs(seed);
  const double beta = compute_beta(sp.coupled);
  const StepPolicy policy = make_policy(beta, default_epsilon(beta));
  const StopRule stop{0.0, iterations, 1};

  std::vector<IterateState> primal_states, dual_states;
  auto keep = [](std::vector<IterateState>& dst) {
    return [&dst](const IterateState& s, const TraceRecord&) { dst.push_back(s); };
  };
  SeparationReport rep;
  solve(sp.primal_only, IterateState::zeros(sp.primal_only.layout), policy, errors, stop, keep(primal_states));
  solve(sp.dual_only, IterateState::zeros(sp.dual_only.layout), policy, errors, stop, keep(dual_states));
  long idx = 0;
  bool ok = true;
  rep.coupled = solve(sp.coupled, IterateState::zeros(sp.coupled.layout), policy, errors, stop,
                      [&](const IterateState& s, const TraceRecord&) {
                        if (!ok) return;
                        const bool good = idx < static_cast<long>(primal_states.size()) &&
                                          idx < static_cast<long>(dual_states.size()) &&
                                          detail::same_bits(s.x1, primal_states[idx].x1) &&
                                          detail::same_bits(s.x2, dual_states[idx].x2) &&
                                          detail::same_bits(s.v1, dual_states[idx].v1) &&
                                          detail::same_bits(s.v2, dual_states[idx].v2);
                        if (!good) {
                          ok = false;
                          rep.first_mismatch = idx;
                        }
                        ++idx;
                      });
  rep.iterations = idx;
  rep.identical = ok && idx == static_cast<long>(primal_states.size()) && idx == static_cast<long>(dual_states.size());
  rep.detail = rep.identical ? "identical" : "differs at iteration " + std::to_string(rep.first_mismatch);
  return rep;
}

inline std::vector<std::string> names() { return {"lasso", "qp", "deblur", "separation"}; }

}  // namespace fbf::demos
