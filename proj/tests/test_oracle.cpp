#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace fbf;
using fbf::testing::max_abs;
using fbf::testing::vec;

TEST(Grid, QuadraticBowl) {
  const auto g = oracle::grid_refine_minimize([](const Vector& x) { return std::pow(x[0] - 0.3, 2); }, -1.0, 1.0, 1, 6);
  EXPECT_NEAR(g.argmin[0], 0.3, 1e-3);
}

TEST(Grid, ScalarLasso) {
  const auto g = oracle::grid_refine_minimize(
      [](const Vector& x) { return 0.5 * std::pow(x[0] - 1, 2) + 0.4 * std::abs(x[0]); }, -3.0, 3.0, 1, 6);
  EXPECT_NEAR(g.argmin[0], 0.6, 1e-3);
}

TEST(Grid, IndicatorClampsMinimizer) {
  const auto g = oracle::grid_refine_minimize(
      [](const Vector& x) { return x[0] < 0.0 || x[0] > 0.2 ? kInfinity : 0.5 * std::pow(x[0] - 1, 2); }, -1.0, 1.0, 1,
      6);
  EXPECT_NEAR(g.argmin[0], 0.2, 1e-3);
}

TEST(Grid, LevelValuesNonincreasing) {
  const auto g = oracle::grid_refine_minimize(
      [](const Vector& x) { return std::pow(x[0] - 0.123, 2) + 2 * std::pow(x[1] + 0.77, 2) + std::abs(x[2] - 0.5); },
      -2.0, 2.0, 3, 6);
  ASSERT_EQ(g.level_values.size(), 7u);
  for (std::size_t t = 1; t < g.level_values.size(); ++t) EXPECT_LE(g.level_values[t], g.level_values[t - 1]);
  EXPECT_LE(max_abs(g.argmin, vec({0.123, -0.77, 0.5})), 1e-3);
}

TEST(Grid, Errors) {
  auto inf = [](const Vector&) { return kInfinity; };
  auto zero = [](const Vector&) { return 0.0; };
  EXPECT_THROW(oracle::grid_refine_minimize(inf, -1.0, 1.0, 1, 2), OracleError);
  EXPECT_THROW(oracle::grid_refine_minimize(zero, -1.0, 1.0, 4, 2), OracleError);
  EXPECT_THROW(oracle::grid_refine_minimize(zero, 1.0, -1.0, 1, 2), OracleError);
}

TEST(Kkt, UnconstrainedIdentity) {
  const Vector x = oracle::kkt_quadratic_solve(Matrix::Identity(3, 3), Vector::Zero(3), Matrix(0, 3), Vector(0));
  EXPECT_EQ(x, Vector::Zero(3));
}

TEST(Kkt, ProjectionOntoLine) {
  Matrix E(1, 2);
  E << 1, 1;
  const Vector x = oracle::kkt_quadratic_solve(Matrix::Identity(2, 2), Vector::Zero(2), E, vec({2}));
  EXPECT_LE(max_abs(x, vec({1, 1})), 1e-15);
}

TEST(Kkt, RandomInstanceResiduals) {
  std::mt19937_64 rng(7);
  const Matrix B = random_normal(4, 4, rng);
  const Matrix Q = B.transpose() * B + 0.1 * Matrix::Identity(4, 4);
  const Vector c = random_normal(4, rng);
  const Matrix E = random_normal(2, 4, rng);
  const Vector d = random_normal(2, rng);
  const Vector x = oracle::kkt_quadratic_solve(Q, c, E, d);
  EXPECT_LE((E * x - d).norm(), 1e-10);
  // Q x + c must lie in range(E^T): solve for lambda by least squares and check the residual.
  const Vector g = Q * x + c;
  const Vector lambda = (E * E.transpose()).ldlt().solve(-E * g);
  EXPECT_LE((g + E.transpose() * lambda).norm(), 1e-10);
}

TEST(Kkt, SingularSystem) {
  Matrix E(2, 2);
  E << 1, 1, 2, 2;
  EXPECT_THROW(oracle::kkt_quadratic_solve(Matrix::Identity(2, 2), Vector::Zero(2), E, vec({1, 2})), OracleError);
}

TEST(GaussSolve, MatchesEigen) {
  std::mt19937_64 rng(8);
  const Matrix A = random_normal(6, 6, rng);
  const Vector b = random_normal(6, rng);
  EXPECT_LE(max_abs(oracle::gauss_solve(A, b), A.partialPivLu().solve(b)), 1e-10);
  EXPECT_THROW(oracle::gauss_solve(Matrix::Zero(2, 2), Vector::Zero(2)), OracleError);
}

TEST(SvdNorm, Diagonal) {
  EXPECT_NEAR(oracle::dense_svd_norm(vec({3, 1}).asDiagonal().toDenseMatrix()), 3.0, 1e-12);
}

TEST(SvdNorm, RankOne) {
  const Vector u = vec({2, 0, 0}), v = vec({0, 3, 4});
  EXPECT_NEAR(oracle::dense_svd_norm(u * v.transpose()), 10.0, 1e-12);
}

TEST(SvdNorm, RandomAgreesWithPowerIteration) {
  std::mt19937_64 rng(9);
  const Matrix A = random_normal(8, 5, rng);
  EXPECT_NEAR(oracle::dense_svd_norm(A), operator_norm(dense(A)).value, 1e-8);
  EXPECT_NEAR(oracle::dense_svd_norm(A), oracle::dense_svd_norm(A.transpose()), 1e-12);
  EXPECT_THROW(oracle::dense_svd_norm(Matrix::Zero(257, 1)), OracleError);
}

TEST(Closed, SoftThresholdAndOrthonormalLasso) {
  EXPECT_EQ(oracle::soft_threshold(2.0, 0.5), 1.5);
  EXPECT_EQ(oracle::soft_threshold(-2.0, 0.5), -1.5);
  EXPECT_EQ(oracle::soft_threshold(0.3, 0.5), 0.0);
  const Vector x = oracle::lasso_orthonormal(Matrix::Identity(3, 3), vec({1.0, -0.2, 3.0}), 0.5, Vector::Zero(3), 0.25);
  EXPECT_LE(max_abs(x, vec({0.5 / 1.5, 0.0, 2.5 / 1.5})), 1e-15);
  EXPECT_THROW(oracle::lasso_orthonormal(2.0 * Matrix::Identity(2, 2), vec({1, 1}), 0.1, Vector::Zero(2)), OracleError);
}
