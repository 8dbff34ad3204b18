// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "fbf/selfcheck.hpp"
#include "support.hpp"

using namespace fbf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

SolveResult run(const demos::Demo& d, const ErrorSchedule& e = zero_errors()) {
  return solve(d.system, d.init, d.policy, e, d.stop);
}

Outcome oracle_run(const demos::Demo& d) {
  const auto t0 = Clock::now();
  const auto res = run(d);
  const double err = io::max_abs_difference(extract_solution(res.final_state, d.system).xbar, d.reference);
  const double t = seconds_since(t0);
  return {res.status == SolveStatus::converged && err <= 1e-6 && t < 5.0,
          std::string(to_string(res.status)) + fmt(", max error %.2e, %.3f s", err, t)};
}

Outcome lasso_oracle() { return oracle_run(demos::lasso()); }

Outcome qp_oracle() { return oracle_run(demos::qp()); }

Outcome grid_oracle() {
  double worst = 0.0;
  std::string where;
  int count = 0;
  for (int dim = 1; dim <= 3; ++dim) {
    std::mt19937_64 rng(mix_seed(42, 300 + dim));
    for (const auto& s : check::catalog_samples(dim))
      for (double g : {0.1, 1.0, 10.0})
        for (int t = 0; t < 3; ++t) {
          const Vector x = 2.0 * random_normal(dim, rng);
          const auto c = check::compare_with_grid(s, g, x, 6);
          ++count;
          if (c.distance > worst) {
            worst = c.distance;
            where = s.name + " dim " + std::to_string(dim) + fmt(" gamma %g", g);
          }
        }
  }
  return {worst <= 2e-3, fmt("%.0f comparisons, worst distance %.2e", count, worst) + " (" + where + ")"};
}

Outcome moreau() {
  double worst = 0.0;
  int entries = 0;
  for (int dim = 1; dim <= 3; ++dim)
    for (const auto& s : check::catalog_samples(dim)) {
      worst = std::max(worst, check::moreau_defect(s.f.prox, 100, mix_seed(42, 400 + dim + 10 * entries)));
      ++entries;
    }
  return {worst <= 1e-12, fmt("%.0f entries x 100 draws, worst defect %.2e", entries, worst)};
}

Outcome summability() {
  double worst = 0.0;
  std::string detail;
  for (const auto& d : {demos::lasso(), demos::qp()}) {
    const auto res = run(d);
    if (res.status != SolveStatus::converged || res.trace.size() < 4) return {false, d.name + " did not converge"};
    const std::size_t n = res.trace.size();
    const auto& q3 = res.trace[(3 * n) / 4 - 1].partial_sums;
    const auto& end = res.trace.back().partial_sums;
    for (int j = 0; j < 4; ++j) {
      const double ratio = end[j] > 0.0 ? (end[j] - q3[j]) / end[j] : 0.0;
      worst = std::max(worst, ratio);
    }
    detail += d.name + " " + std::to_string(res.iterations) + " it; ";
  }
  return {worst < 0.01, detail + fmt("worst last-quarter share %.2e", worst)};
}

Outcome transversality() {
  double worst = 0.0;
  std::string detail;
  auto one = [&](const std::string& name, const SystemSpec& sp, const StepPolicy& pol, long max_iter) {
    const auto res = solve(sp, IterateState::zeros(sp.layout), pol, zero_errors(), {1e-8, max_iter, 1000});
    double local = 0.0;
    for (std::size_t k = 0; k < sp.layout.s(); ++k)
      local = std::max(local, (sp.M[k].adjoint(res.final_state.v2[k]) - sp.N[k].adjoint(res.final_state.v1[k])).norm());
    if (res.status != SolveStatus::converged) local = kInfinity;
    worst = std::max(worst, local);
    detail += name + fmt(" %.1e; ", local);
  };
  for (const auto& d : {demos::lasso(), demos::qp(), demos::lasso(42, 0.1), demos::deblur()})
    one(d.name, d.system, d.policy, 200000);
  const auto sep = demos::separation_specs(42);
  const double beta = compute_beta(sep.coupled);
  one("separation", sep.coupled, make_policy(beta, default_epsilon(beta)), 200000);
  return {worst <= 1e-7, detail};
}

Outcome robustness() {
  const auto d = demos::lasso();
  const auto clean = run(d);
  const auto noisy = run(d, geometric_errors(0.9, 0.1, 42));
  const double diff = io::max_abs_difference(noisy.final_state.x1, clean.final_state.x1);
  return {noisy.status == SolveStatus::converged && diff <= 1e-5,
          std::string(to_string(noisy.status)) + fmt(" in %.0f iterations, distance to clean %.2e",
                                                     static_cast<double>(noisy.iterations), diff)};
}

Outcome step_bounds() {
  const auto d = demos::lasso();
  const double b = d.beta, eps = d.epsilon, hi = (1.0 - eps) / b;
  int rejected = 0, cases = 0;
  auto expect_throw = [&](const std::function<void()>& f) {
    ++cases;
    try {
      f();
    } catch (const ConfigurationError&) {
      ++rejected;
    }
  };
  expect_throw([&] { make_policy(b, 1.0 / (b + 1.0)); });
  expect_throw([&] { make_policy(b, 0.9); });
  expect_throw([&] { make_policy(b, 0.0); });
  expect_throw([&] { make_policy(b, eps, hi * (1 + 1e-9)); });
  expect_throw([&] { make_policy(b, eps, 0.5 * eps); });
  expect_throw([&] { make_policy(b, eps, std::vector<double>{hi, hi, 2 * hi}); });
  long iterations = 0;
  auto count = [&](const IterateState&, const TraceRecord&) { ++iterations; };
  expect_throw([&] { solve(d.system, d.init, StepPolicy(b, eps, {2 * hi}), zero_errors(), d.stop, count); });
  expect_throw([&] {
    io::SolverConfig cfg;
    cfg.gamma = 1.5 * hi;
    io::run(d.system, cfg, zero_errors());
  });
  return {rejected == cases && iterations == 0,
          fmt("%.0f of %.0f configurations rejected, %.0f iterations taken", rejected, cases,
              static_cast<double>(iterations))};
}

Outcome beta_check() {
  double worst_lo = kInfinity, worst_hi = -kInfinity;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const SystemSpec sp = fbf::testing::random_system(seed);
    double snl = 0.0, mx = 0.0;
    for (std::size_t k = 0; k < sp.layout.s(); ++k) {
      const Matrix N = materialize(sp.N[k]), M = materialize(sp.M[k]);
      for (std::size_t i = 0; i < sp.layout.m(); ++i)
        snl += std::pow(oracle::dense_svd_norm(N * materialize(sp.L[k][i])), 2);
      mx = std::max(mx, std::pow(oracle::dense_svd_norm(N), 2) + std::pow(oracle::dense_svd_norm(M), 2));
    }
    const double root = std::sqrt(snl + mx);
    const double beta = compute_beta(sp);
    // beta - nu0 must lie in [root, 1.01 root]
    const double ratio = (beta - sp.C.nu0) / root;
    worst_lo = std::min(worst_lo, ratio);
    worst_hi = std::max(worst_hi, ratio);
  }
  return {worst_lo >= 1.0 - 1e-9 && worst_hi <= 1.01 + 1e-9,
          fmt("(beta - nu0) / hand value in [%.6f, %.6f] over 6 instances", worst_lo, worst_hi)};
}

Outcome separation() {
  const auto rep = demos::run_separation(42, 500);
  return {rep.identical, rep.detail + " over " + std::to_string(rep.iterations) + " iterations"};
}

Outcome strong_convergence() {
  const auto d = demos::lasso(42, 0.1);
  IterateState st = d.init;
  for (long n = 0; n < 5000; ++n) {
    st = step(d.system, st, d.policy.gamma(n), ErrorSample{}, d.policy.interval(), false).state;
    const double e = (st.x1[0] - d.reference[0]).norm();
    if (e < 1e-5) return {true, fmt("error %.2e after %.0f iterations", e, static_cast<double>(n + 1))};
  }
  return {false, fmt("error %.2e after 5000 iterations", (st.x1[0] - d.reference[0]).norm())};
}

Outcome imaging() {
  const auto t0 = Clock::now();
  const auto d = demos::deblur();
  const auto res = run(d);
  const double e1 = primal_surrogate(*d.problem, res.final_state.x1, res.final_state.x2);
  const long more = 99 * res.iterations;
  const auto longer = solve(d.system, res.final_state, d.policy, zero_errors(), {0.0, more, more});
  const double e2 = primal_surrogate(*d.problem, longer.final_state.x1, longer.final_state.x2);
  const double rel = std::abs(e1 - e2) / std::max(std::abs(e2), 1e-300);
  const double t = seconds_since(t0);
  const bool ok = res.status == SolveStatus::converged && res.iterations <= 20000 && res.final_displacement <= 1e-6 &&
                  rel <= 1e-4 && t < 60.0;
  return {ok, std::to_string(res.iterations) + " iterations to " + fmt("%.1e", res.final_displacement) +
                  fmt("; energy %.6f vs %.6f at 100x", e1, e2) + fmt(" (rel %.2e); %.1f s total", rel, t)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"lasso oracle", lasso_oracle},
      {"constrained qp oracle", qp_oracle},
      {"prox vs grid oracle", grid_oracle},
      {"Moreau identity", moreau},
      {"summability evidence", summability},
      {"transversality at exit", transversality},
      {"robustness to summable errors", robustness},
      {"step-bound enforcement", step_bounds},
      {"beta against dense SVD", beta_check},
      {"separation property", separation},
      {"strong-convergence probe", strong_convergence},
      {"imaging deblur demo", imaging},
  };
  int failed = 0, idx = 0;
  for (const auto& [name, fn] : criteria) {
    ++idx;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", idx, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", idx - failed, idx);
  return failed == 0 ? 0 : 1;
}
