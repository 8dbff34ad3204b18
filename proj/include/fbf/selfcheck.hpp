#pragma once

// Fast invariant battery behind `fbf check`, plus the catalog sample set
// shared with the test suite.

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/demos.hpp"
#include "fbf/imaging.hpp"
#include "fbf/io.hpp"
#include "fbf/linop.hpp"
#include "fbf/oracle.hpp"
#include "fbf/prox.hpp"

namespace fbf::check {

/// One instance of a catalog entry on R^dim. Constrained entries carry an
/// explicit parametrization {x0 + Z t} of their feasible set so that grid
/// searches can run over t instead of hitting a null set.
struct CatalogSample {
  std::string name;
  ConvexFunction f;
  bool constrained = false;
  Vector x0;
  Matrix Z;
};

/// One sample of every catalog entry in dimension `dim` (1..3).
inline std::vector<CatalogSample> catalog_samples(int dim, std::uint64_t seed = 42) {
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(dim)));
  std::vector<CatalogSample> out;
  auto add = [&out](std::string name, ConvexFunction f) { out.push_back({std::move(name), std::move(f), false, {}, {}}); };
  Vector w = Vector::Constant(dim, 0.7);
  w[0] = 1.3;
  add("l1", prox::l1(w));
  const Blocks blocks = dim == 3 ? Blocks{{0, 2}, {1}} : prox::contiguous_blocks(dim, dim);
  add("group_l12", prox::group_l12(dim, blocks, 0.8));
  Vector lo = Vector::Constant(dim, -0.5), hi = Vector::Constant(dim, 0.25);
  hi[0] = 1.5;
  add("indicator_box", prox::indicator_box(lo, hi));
  out.push_back({"indicator_zero", prox::indicator_zero(dim), true, Vector::Zero(dim), Matrix(dim, 0)});
  // {x : sum x = 1}: x0 = (1/dim) 1, null space spanned by e_j - e_{j+1}.
  Matrix Z = Matrix::Zero(dim, dim - 1);
  for (int j = 0; j + 1 < dim; ++j) {
    Z(j, j) = 1.0;
    Z(j + 1, j) = -1.0;
  }
  out.push_back({"indicator_affine", prox::indicator_affine(Matrix::Ones(1, dim), Vector::Ones(1)), true,
                 Vector::Constant(dim, 1.0 / dim), Z});
  const Matrix T = random_normal(dim + 1, dim, rng);
  const Vector r = random_normal(dim + 1, rng);
  add("quadratic_fidelity", prox::quadratic_fidelity({{dense(T, "T"), r, 0.5}}, dim));
  add("zero_function", prox::zero_function(dim));
  add("scaled_translated", prox::scaled_translated(prox::l1(dim, 1.0), 0.6, random_normal(dim, rng)));
  return out;
}

struct GridComparison {
  Vector prox;
  Vector grid_argmin;
  double prox_value = 0.0;  // prox objective at the prox output
  double grid_value = 0.0;
  double distance = 0.0;    // max-norm distance between the two minimizers
};

/// Minimizes f(y) + ||y - x||^2 / (2 gamma) with the grid oracle (on the box
/// [-R, R]^dim, or over t for constrained samples) and compares with the
/// catalog prox.
inline GridComparison compare_with_grid(const CatalogSample& s, double gamma, const Vector& x, int levels = 6,
                                        double R = 10.0) {
  auto objective = [&](const Vector& y) { return s.f.value(y) + (y - x).squaredNorm() / (2.0 * gamma); };
  GridComparison c;
  c.prox = s.f.prox.resolve(gamma, x);
  c.prox_value = objective(c.prox);
  if (s.constrained && s.Z.cols() == 0) {
    c.grid_argmin = s.x0;
    c.grid_value = objective(s.x0);
  } else if (s.constrained) {
    const int k = static_cast<int>(s.Z.cols());
    auto param = [&](const Vector& t) { return objective(s.x0 + s.Z * t); };
    const auto g = oracle::grid_refine_minimize(param, -R, R, k, levels);
    c.grid_argmin = s.x0 + s.Z * g.argmin;
    c.grid_value = g.value;
  } else {
    const auto g = oracle::grid_refine_minimize(objective, -R, R, static_cast<int>(x.size()), levels);
    c.grid_argmin = g.argmin;
    c.grid_value = g.value;
  }
  c.distance = (c.prox - c.grid_argmin).lpNorm<Eigen::Infinity>();
  return c;
}

/// max over trials of ||J_{gamma A} x + gamma J_{gamma^{-1} A^{-1}}(x / gamma) - x||_inf.
inline double moreau_defect(const ResolventOp& op, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  const double gammas[3] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double g = gammas[pick(rng)];
    const Vector x = 3.0 * random_normal(op.dim(), rng);
    const Vector lhs = op.resolve(g, x) + g * resolvent_of_inverse(op, 1.0 / g, x / g);
    worst = std::max(worst, (lhs - x).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

struct Row {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 42;
  bool corrupt_adjoint = false;  // debug hook: plant a wrong adjoint
  std::vector<std::string> problems;
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

}  // namespace detail

inline std::vector<Row> run_checks(const Options& opt = {}) {
  using detail::sci;
  std::vector<Row> rows;
  auto add = [&rows](std::string name, bool pass, std::string detail) {
    rows.push_back({std::move(name), pass, std::move(detail)});
  };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(name, false, std::string("exception: ") + e.what());
    }
  };
  std::mt19937_64 rng(opt.seed);

  // Adjoint pairs.
  guarded("adjoint", [&] {
    const Matrix A = random_normal(3, 2, rng);
    LinOp dense_op = dense(A, "dense3x2");
    if (opt.corrupt_adjoint) {
      Matrix bad = A.transpose();
      bad(0, 0) += 1.0;
      dense_op = LinOp(
          2, 3, [A](const Vector& x) -> Vector { return A * x; }, [bad](const Vector& y) -> Vector { return bad * y; },
          "dense3x2(corrupted)");
    }
    const std::vector<LinOp> ops{dense_op,
                                 gradient_op(5, 4),
                                 second_gradient_op(5, 4),
                                 haar_analysis_op(4, 6),
                                 box_blur_op(5, 4, 1),
                                 compose(gradient_op(5, 4), box_blur_op(5, 4, 1))};
    for (const auto& op : ops) {
      const double d = adjoint_check(op, 100, opt.seed);
      add("adjoint " + op.tag(), d <= 1e-10, "defect " + sci(d));
    }
  });

  guarded("operator_norm", [&] {
    const Matrix A = random_normal(6, 4, rng);
    const double svd = oracle::dense_svd_norm(A);
    const auto est = operator_norm(dense(A, "A"));
    const bool ok = std::abs(est.value - svd) <= 1e-8 && est.upper_bound >= svd;
    add("operator_norm vs dense SVD (6x4)", ok, "|diff| " + sci(std::abs(est.value - svd)));
  });

  guarded("moreau", [&] {
    for (int dim = 1; dim <= 3; ++dim)
      for (const auto& s : catalog_samples(dim, opt.seed)) {
        const double d = moreau_defect(s.f.prox, 100, mix_seed(opt.seed, dim));
        add("moreau " + s.name + " dim " + std::to_string(dim), d <= 1e-12, "defect " + sci(d));
      }
  });

  guarded("prox grid", [&] {
    for (int dim = 1; dim <= 2; ++dim)
      for (const auto& s : catalog_samples(dim, opt.seed)) {
        const Vector x = 2.0 * random_normal(dim, rng);
        const auto c = compare_with_grid(s, 1.0, x, 6);
        const bool ok = c.distance <= 2e-3 && c.prox_value <= c.grid_value + 2e-3;
        add("prox vs grid " + s.name + " dim " + std::to_string(dim), ok, "dist " + sci(c.distance));
      }
  });

  guarded("beta", [&] {
    SystemSpec sp;
    sp.layout = SpaceLayout{{1}, {1}, {1}, {1}};
    sp.z = {Vector::Zero(1)};
    sp.r = {Vector::Zero(1)};
    sp.A = {prox::zero_function(1).prox};
    sp.B = {prox::zero_function(1).prox};
    sp.D = {prox::zero_function(1).prox};
    sp.M = {identity(1)};
    sp.N = {identity(1)};
    sp.L = {{identity(1)}};
    sp.C = zero_coupling({1});
    const double b0 = compute_beta(sp);
    const double want0 = std::sqrt(3.0);
    add("beta identities nu0=0", b0 >= want0 && b0 <= want0 * 1.01 + 1e-12, "beta " + sci(b0));
    sp.C = gradient_coupling([](const Vector& x) -> Vector { return 2.0 * x; }, 2.0, {1});
    const double b2 = compute_beta(sp);
    add("beta identities nu0=2", b2 >= 2.0 + want0 && b2 <= 2.0 + want0 * 1.01 + 1e-12, "beta " + sci(b2));
  });

  guarded("fixed point", [&] {
    for (const auto& d : {demos::lasso(opt.seed), demos::qp(opt.seed)}) {
      const double res = fixed_point_residual(d.system, *d.lifted, d.policy.gamma(0), d.beta);
      add("fixed point at lifted " + d.name + " solution", res <= 1e-6, "residual " + sci(res));
    }
  });

  for (const auto& path : opt.problems) {
    guarded("problem " + path, [&] {
      const io::Problem pr = io::load_problem(path);
      const io::RunReport rep = io::run_problem(pr);
      if (!pr.reference) {
        add("problem " + path, rep.result.status == SolveStatus::converged, to_string(rep.result.status));
        return;
      }
      const double e = *rep.reference_error;
      add("problem " + path + " vs reference", rep.result.status == SolveStatus::converged && e <= 1e-6,
          std::string(to_string(rep.result.status)) + ", max error " + sci(e));
    });
  }
  return rows;
}

inline bool all_pass(const std::vector<Row>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

}  // namespace fbf::check
