#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace fbf;
using fbf::testing::max_abs;
using fbf::testing::state_distance;
using fbf::testing::vec;

namespace {

// m = s = 1 on dimension 1: A = d(0.5 x^2), everything else zero.
SystemSpec half_square_system() {
  SystemSpec sp;
  sp.layout = SpaceLayout{{1}, {1}, {1}, {1}};
  sp.z = {Vector::Zero(1)};
  sp.r = {Vector::Zero(1)};
  sp.A = {fbf::testing::half_square_resolvent(1)};
  sp.B = {prox::zero_function(1).prox};
  sp.D = {prox::zero_function(1).prox};
  sp.C = zero_coupling({1});
  sp.M = {zero_op(1, 1)};
  sp.N = {zero_op(1, 1)};
  sp.L = {{zero_op(1, 1)}};
  return sp;
}

SolveResult run(const demos::Demo& d, const ErrorSchedule& e = zero_errors()) {
  return solve(d.system, d.init, d.policy, e, d.stop);
}

}  // namespace

TEST(MakePolicy, DefaultIsUpperEnd) {
  const StepPolicy p = make_policy(2.0, 0.1);
  EXPECT_DOUBLE_EQ(p.gamma(0), 0.45);
  EXPECT_DOUBLE_EQ(p.gamma(1000), 0.45);
}

TEST(MakePolicy, EpsilonTooLarge) {
  EXPECT_THROW(make_policy(2.0, 0.4), ConfigurationError);
  EXPECT_THROW(make_policy(2.0, 1.0 / 3.0), ConfigurationError);
  EXPECT_THROW(make_policy(2.0, 0.0), ConfigurationError);
}

TEST(MakePolicy, ConstantInsideInterval) {
  const StepPolicy p = make_policy(std::sqrt(3.0), 0.01, 0.5);
  EXPECT_DOUBLE_EQ(p.gamma(7), 0.5);
  EXPECT_NEAR(p.interval().hi, 0.99 / std::sqrt(3.0), 1e-15);
}

TEST(MakePolicy, GammaOutsideInterval) {
  EXPECT_THROW(make_policy(2.0, 0.1, 0.46), StepBoundError);
  EXPECT_THROW(make_policy(2.0, 0.1, 0.05), StepBoundError);
  EXPECT_THROW(make_policy(2.0, 0.1, std::vector<double>{0.2, 0.3, 0.5}), StepBoundError);
  EXPECT_THROW(make_policy(0.0, 0.1), HypothesisError);
}

TEST(MakePolicy, UserSequenceHoldsLastValue) {
  const StepPolicy p = make_policy(2.0, 0.1, std::vector<double>{0.2, 0.3, 0.4});
  EXPECT_DOUBLE_EQ(p.gamma(0), 0.2);
  EXPECT_DOUBLE_EQ(p.gamma(2), 0.4);
  EXPECT_DOUBLE_EQ(p.gamma(50), 0.4);
}

TEST(DefaultEpsilon, InsideOpenInterval) {
  for (double beta : {0.01, 1.0, 12.7, 1e4}) {
    const double e = default_epsilon(beta);
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 1.0 / (beta + 1.0));
    EXPECT_LE(e, (1.0 - e) / beta);
  }
}

TEST(Step, HandEvaluatedHalfSquare) {
  const SystemSpec sp = half_square_system();
  IterateState st = IterateState::zeros(sp.layout);
  st.x1[0] = vec({1.0});
  const auto out = step(sp, st, 0.5, ErrorSample{}, {0.5, 0.5});
  EXPECT_NEAR(out.state.x1[0][0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(out.state.n, 1);
  EXPECT_EQ(out.record.n, 0);
  EXPECT_NEAR(out.record.block_displacements[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(out.record.displacement, 1.0 / 3.0, 1e-15);
}

TEST(Step, MatchesDenseReferenceWithErrors) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const SystemSpec sp = fbf::testing::random_system(seed);
    const double beta = compute_beta(sp);
    const StepPolicy pol = make_policy(beta, default_epsilon(beta));
    const ErrorSchedule errs = geometric_errors(0.9, 0.5, seed);
    IterateState st = fbf::testing::random_state(sp.layout, seed * 7);
    for (int it = 0; it < 20; ++it) {
      const ErrorSample e = errs.sample(st.n, sp.layout);
      const IterateState ref = fbf::testing::reference_step(sp, st, pol.gamma(st.n), e);
      const auto out = step(sp, st, pol.gamma(st.n), e, pol.interval());
      ASSERT_LE(state_distance(ref, out.state), 1e-12) << "seed " << seed << " iteration " << it;
      st = out.state;
    }
  }
}

TEST(Step, ZeroSystemStaysZero) {
  SystemSpec sp = fbf::testing::random_system(5);
  for (auto& z : sp.z) z.setZero();
  for (auto& r : sp.r) r.setZero();
  sp.C = zero_coupling(sp.layout.h_dims);
  const double beta = compute_beta(sp);
  const StepPolicy pol = make_policy(beta, default_epsilon(beta));
  for (long n = 0; n < 50; ++n) {
    const auto out = step(sp, IterateState::zeros(sp.layout), pol.gamma(n), ErrorSample{}, pol.interval());
    EXPECT_EQ(state_distance(out.state, IterateState::zeros(sp.layout)), 0.0);
  }
  // zero displacement meets even a zero tolerance
  const auto res = solve(sp, IterateState::zeros(sp.layout), pol, zero_errors(), {0.0, 50, 1});
  EXPECT_EQ(res.status, SolveStatus::converged);
  EXPECT_EQ(res.iterations, 1);
}

TEST(Step, OracleSolutionIsFixedPoint) {
  const auto d = demos::lasso();
  const auto out = step(d.system, *d.lifted, d.policy.gamma(0), ErrorSample{}, d.policy.interval());
  EXPECT_LE(out.record.displacement, 1e-12);
}

TEST(Step, RejectsGammaOutsideInterval) {
  const SystemSpec sp = half_square_system();
  EXPECT_THROW(step(sp, IterateState::zeros(sp.layout), 0.6, ErrorSample{}, {0.1, 0.5}), StepBoundError);
  EXPECT_THROW(step(sp, IterateState::zeros(sp.layout), 0.05, ErrorSample{}, {0.1, 0.5}), StepBoundError);
}

TEST(Step, NonFiniteResolventIsNumericError) {
  SystemSpec sp = half_square_system();
  sp.M = {identity(1)};
  sp.B = {ResolventOp(1, [](double, const Vector& x) -> Vector { return x * std::nan(""); }, "broken")};
  IterateState st = IterateState::zeros(sp.layout);
  st.n = 4;
  st.v2[0] = vec({1.0});
  try {
    step(sp, st, 0.5, ErrorSample{}, {0.1, 0.5});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.iteration(), 4);
    EXPECT_NE(std::string(e.what()).find("p22[0]"), std::string::npos);
  }
  const double beta = compute_beta(sp);
  const auto res = solve(sp, st, make_policy(beta, default_epsilon(beta)), zero_errors(), {1e-8, 100, 1});
  EXPECT_EQ(res.status, SolveStatus::numeric_error);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_NE(res.message.find("p22"), std::string::npos);
}

TEST(Solve, LassoMatchesSoftThreshold) {
  const auto d = demos::lasso();
  const auto res = run(d);
  ASSERT_EQ(res.status, SolveStatus::converged);
  EXPECT_LE(max_abs(extract_solution(res.final_state, d.system).xbar[0], d.reference[0]), 1e-6);
}

TEST(Solve, QpMatchesKkt) {
  const auto d = demos::qp();
  const auto res = run(d);
  ASSERT_EQ(res.status, SolveStatus::converged);
  EXPECT_LE(max_abs(res.final_state.x1[0], d.reference[0]), 1e-6);
}

TEST(Solve, MaxIterZeroReturnsInit) {
  const auto d = demos::lasso();
  IterateState init = fbf::testing::random_state(d.system.layout, 9);
  const auto res = solve(d.system, init, d.policy, zero_errors(), {1e-8, 0, 1});
  EXPECT_EQ(res.status, SolveStatus::max_iter);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_TRUE(res.trace.empty());
  EXPECT_EQ(state_distance(res.final_state, init), 0.0);
  EXPECT_EQ(res.final_state.n, 0);
}

TEST(Solve, RejectsBadStopRuleAndState) {
  const auto d = demos::lasso();
  EXPECT_THROW(solve(d.system, d.init, d.policy, zero_errors(), {1e-8, 10, 0}), ConfigurationError);
  EXPECT_THROW(solve(d.system, d.init, d.policy, zero_errors(), {1e-8, -1, 1}), ConfigurationError);
  IterateState bad = d.init;
  bad.x1[0] = Vector::Zero(3);
  EXPECT_THROW(solve(d.system, bad, d.policy, zero_errors(), d.stop), SpecificationError);
}

TEST(Solve, OutOfRangeStepsRejectedUpFront) {
  const auto d = demos::lasso();
  EXPECT_THROW(make_policy(d.beta, d.epsilon, 1.0 / d.beta), StepBoundError);
  EXPECT_THROW(make_policy(d.beta, 1.0 / (d.beta + 1.0)), ConfigurationError);
}

TEST(Solve, PartialSumsNondecreasingAndSummable) {
  for (const auto& d : {demos::lasso(), demos::qp()}) {
    const auto res = run(d);
    ASSERT_EQ(res.status, SolveStatus::converged);
    for (std::size_t t = 1; t < res.trace.size(); ++t)
      for (int j = 0; j < 4; ++j) ASSERT_GE(res.trace[t].partial_sums[j], res.trace[t - 1].partial_sums[j]);
    const auto& mid = res.trace[res.trace.size() * 3 / 4 - 1].partial_sums;
    const auto& last = res.trace.back().partial_sums;
    double total = 0.0, tail = 0.0;
    for (int j = 0; j < 4; ++j) {
      total += last[j];
      tail += last[j] - mid[j];
    }
    EXPECT_LT(tail, 0.01 * total) << d.name;
    for (int j = 0; j < 4; ++j) EXPECT_EQ(res.partial_sums[j], last[j]);
  }
}

TEST(Solve, RobustToSummableErrors) {
  const auto d = demos::lasso();
  const auto clean = run(d);
  const auto noisy = run(d, geometric_errors(0.9, 0.1, 42));
  ASSERT_EQ(noisy.status, SolveStatus::converged);
  EXPECT_LE(noisy.final_displacement, 1e-6);
  EXPECT_LE(max_abs(noisy.final_state.x1[0], clean.final_state.x1[0]), 1e-5);
}

TEST(Solve, Deterministic) {
  const auto d = demos::qp();
  const auto a = run(d, geometric_errors(0.9, 0.1, 3));
  const auto b = run(d, geometric_errors(0.9, 0.1, 3));
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    ASSERT_EQ(a.trace[t].displacement, b.trace[t].displacement);
    ASSERT_EQ(a.trace[t].partial_sums, b.trace[t].partial_sums);
  }
  EXPECT_EQ(state_distance(a.final_state, b.final_state), 0.0);
}

TEST(Solve, StronglyConvexVariantConverges) {
  const auto d = demos::lasso(42, 0.1);
  EXPECT_EQ(d.name, "lasso_uc");
  const auto res = solve(d.system, d.init, d.policy, zero_errors(), {1e-8, 5000, 1});
  long first_below = -1;
  IterateState st = d.init;
  for (long n = 0; n < 5000; ++n) {
    st = step(d.system, st, d.policy.gamma(n), ErrorSample{}, d.policy.interval(), false).state;
    if (max_abs(st.x1[0], d.reference[0]) < 1e-5) {
      first_below = n + 1;
      break;
    }
  }
  EXPECT_GT(first_below, 0);
  EXPECT_LE(max_abs(res.final_state.x1[0], d.reference[0]), 1e-5);
}

TEST(Solve, TraceEveryKeepsFinalRecord) {
  const auto d = demos::lasso();
  StopRule stop = d.stop;
  stop.trace_every = 10;
  const auto res = solve(d.system, d.init, d.policy, zero_errors(), stop);
  ASSERT_EQ(res.status, SolveStatus::converged);
  const auto full = run(d);
  EXPECT_EQ(res.iterations, full.iterations);
  EXPECT_EQ(res.trace.size(), static_cast<std::size_t>(res.iterations / 10 + (res.iterations % 10 ? 1 : 0)));
  EXPECT_EQ(res.trace.back().n, res.iterations - 1);
  for (std::size_t t = 0; t + 1 < res.trace.size(); ++t) EXPECT_EQ(res.trace[t].n % 10, 9);
  EXPECT_EQ(res.trace.back().displacement, full.trace.back().displacement);
}

TEST(Solve, MaxIterRecordsLastIterate) {
  const auto d = demos::lasso();
  const auto res = solve(d.system, d.init, d.policy, zero_errors(), {1e-8, 7, 5});
  EXPECT_EQ(res.status, SolveStatus::max_iter);
  ASSERT_EQ(res.trace.size(), 2u);
  EXPECT_EQ(res.trace.back().n, 6);
  EXPECT_EQ(res.final_state.n, 7);
}

TEST(Solve, ObserverSeesEveryIteration) {
  const auto d = demos::lasso();
  long calls = 0;
  const auto res = solve(d.system, d.init, d.policy, zero_errors(), {1e-8, 30, 100},
                         [&](const IterateState& s, const TraceRecord& r) {
                           ++calls;
                           EXPECT_EQ(s.n, r.n + 1);
                         });
  EXPECT_EQ(calls, 30);
  EXPECT_EQ(res.iterations, 30);
}

TEST(Solve, GammaSequenceIsFollowed) {
  const auto d = demos::lasso();
  const double hi = d.policy.interval().hi, lo = d.policy.interval().lo;
  const StepPolicy pol = make_policy(d.beta, d.epsilon, std::vector<double>{lo, 0.5 * (lo + hi), hi});
  const auto res = solve(d.system, d.init, pol, zero_errors(), {1e-8, 5, 1});
  ASSERT_EQ(res.trace.size(), 5u);
  EXPECT_DOUBLE_EQ(res.trace[0].gamma, lo);
  EXPECT_DOUBLE_EQ(res.trace[1].gamma, 0.5 * (lo + hi));
  EXPECT_DOUBLE_EQ(res.trace[4].gamma, hi);
}

TEST(Separation, ZeroCouplingSplitsBitwise) {
  const auto rep = demos::run_separation(42, 300);
  EXPECT_TRUE(rep.identical) << rep.detail;
  EXPECT_EQ(rep.iterations, 300);
}

TEST(Separation, NonzeroCouplingIsDetected) {
  // Negative control: the same comparison on a coupled spec must fail.
  auto sp = demos::separation_specs(42);
  std::mt19937_64 rng(1);
  sp.coupled.L = {{dense(random_normal(2, 3, rng), "L")}};
  const double beta = compute_beta(sp.coupled);
  const StepPolicy pol = make_policy(beta, default_epsilon(beta));
  const StopRule stop{0.0, 20, 1};
  const auto a = solve(sp.coupled, IterateState::zeros(sp.coupled.layout), pol, zero_errors(), stop);
  const auto b = solve(sp.primal_only, IterateState::zeros(sp.primal_only.layout), pol, zero_errors(), stop);
  EXPECT_GT(max_abs(a.final_state.x1[0], b.final_state.x1[0]), 1e-6);
}

TEST(ErrorSchedules, GeometricIsSummableAndReproducible) {
  const SpaceLayout lay{{3}, {2}, {2}, {4}};
  const ErrorSchedule e = geometric_errors(0.5, 2.0, 11);
  double total = 0.0;
  for (long n = 0; n < 60; ++n) {
    const ErrorSample s = e.sample(n, lay);
    for (int site = 0; site < kErrorSiteCount; ++site)
      for (const auto& v : s.sites[site]) {
        EXPECT_NEAR(v.norm(), 2.0 * std::pow(0.5, n), 1e-12);
        total += v.norm();
      }
  }
  EXPECT_NEAR(total, kErrorSiteCount * 2.0 * 2.0, 1e-9);
  EXPECT_EQ(*e.sample(3, lay).get(ErrorSite::b21, 0), *e.sample(3, lay).get(ErrorSite::b21, 0));
  EXPECT_THROW(geometric_errors(1.0, 0.1, 1), ConfigurationError);
  EXPECT_TRUE(zero_errors().is_zero());
  EXPECT_EQ(zero_errors().sample(5, lay).get(ErrorSite::a11, 0), nullptr);
}
