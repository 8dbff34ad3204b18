#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BlockVector = std::vector<Vector>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Dimension or structural mismatch in a problem description.
class SpecificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid user configuration (catalog miss, bad parameter, bad epsilon).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Step size outside the admissible interval [eps, (1 - eps) / beta].
class StepBoundError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// beta == 0 or another violated standing assumption of the method.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// Raised by the reference oracles (singular KKT system, infeasible grid).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// splitmix64 finalizer; used to derive independent, order-free RNG streams
/// from structured keys.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ b); }

inline Vector random_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Matrix random_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

inline Vector concat(const BlockVector& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vector out(total);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    out.segment(off, b.size()) = b;
    off += b.size();
  }
  return out;
}

inline BlockVector split(const Vector& v, const std::vector<int>& dims) {
  BlockVector out;
  out.reserve(dims.size());
  Eigen::Index off = 0;
  for (int d : dims) {
    if (off + d > v.size()) throw SpecificationError("split: vector shorter than block layout");
    out.emplace_back(v.segment(off, d));
    off += d;
  }
  if (off != v.size()) throw SpecificationError("split: vector longer than block layout");
  return out;
}

inline BlockVector zero_blocks(const std::vector<int>& dims) {
  BlockVector out;
  out.reserve(dims.size());
  for (int d : dims) out.emplace_back(Vector::Zero(d));
  return out;
}

inline double squared_norm(const BlockVector& blocks) {
  double s = 0.0;
  for (const auto& b : blocks) s += b.squaredNorm();
  return s;
}

}  // namespace fbf
