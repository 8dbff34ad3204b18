#pragma once

// Problem files, prox catalog by name, and run artifacts (trace CSV,
// solution/summary/state JSON).

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbf/core.hpp"
#include "fbf/fbf_solver.hpp"
#include "fbf/imaging.hpp"
#include "fbf/linop.hpp"
#include "fbf/minimization.hpp"
#include "fbf/prox.hpp"
#include "fbf/system.hpp"

namespace fbf::io {

using json = nlohmann::json;

/// Malformed problem file; `what()` starts with the JSON pointer of the offending value.
class SchemaError : public ConfigurationError {
 public:
  SchemaError(const std::string& pointer, const std::string& msg)
      : ConfigurationError((pointer.empty() ? "/" : pointer) + ": " + msg), pointer_(pointer.empty() ? "/" : pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string esc;
  for (char c : key) {
    if (c == '~') esc += "~0";
    else if (c == '/') esc += "~1";
    else esc += c;
  }
  return ptr + "/" + esc;
}

inline std::string child(const std::string& ptr, std::size_t idx) { return ptr + "/" + std::to_string(idx); }

inline const json& member(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(child(ptr, key), "required field is missing");
  return *it;
}

inline const json* optional_member(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

inline long integer(const json& j, const std::string& ptr, long min_value) {
  if (!j.is_number_integer() && !(j.is_number_float() && j.get<double>() == std::floor(j.get<double>())))
    throw SchemaError(ptr, "expected an integer");
  const long v = j.get<long>();
  if (v < min_value) throw SchemaError(ptr, "must be >= " + std::to_string(min_value));
  return v;
}

inline std::string text(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw SchemaError(ptr, "expected a string");
  return j.get<std::string>();
}

inline Vector vector(const json& j, const std::string& ptr, int dim = -1) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
  if (dim >= 0 && static_cast<int>(j.size()) != dim)
    throw SchemaError(ptr, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t t = 0; t < j.size(); ++t) v[static_cast<Eigen::Index>(t)] = number(j[t], child(ptr, t));
  return v;
}

/// Number broadcast to `dim`, or an explicit array of length `dim`.
inline Vector scalar_or_vector(const json& j, const std::string& ptr, int dim) {
  if (j.is_number()) return Vector::Constant(dim, j.get<double>());
  return vector(j, ptr, dim);
}

/// Row-major array of rows.
inline Matrix matrix(const json& j, const std::string& ptr) {
  if (!j.is_array() || j.empty()) throw SchemaError(ptr, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw SchemaError(child(ptr, 0), "expected a non-empty row");
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t a = 0; a < rows; ++a) {
    const std::string rp = child(ptr, a);
    if (!j[a].is_array() || j[a].size() != cols) throw SchemaError(rp, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t b = 0; b < cols; ++b) m(a, b) = number(j[a][b], child(rp, b));
  }
  return m;
}

inline std::vector<int> dims(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of dimensions");
  std::vector<int> out;
  for (std::size_t t = 0; t < j.size(); ++t) out.push_back(static_cast<int>(integer(j[t], child(ptr, t), 1)));
  return out;
}

inline const json& params_of(const json& entry, const std::string& ptr) {
  static const json empty = json::object();
  const json* p = optional_member(entry, "params", ptr);
  if (!p) return empty;
  if (!p->is_object()) throw SchemaError(child(ptr, "params"), "expected an object");
  return *p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear operators

/// A dense matrix (array of rows) or {"builder": name, "params": {...}} with
/// builders identity, zero, dense, scaled, gradient, second_gradient, haar,
/// box_blur. The operator must map R^in_dim to R^out_dim.
inline LinOp parse_linop(const json& j, const std::string& ptr, int in_dim, int out_dim) {
  using namespace detail;
  LinOp op;
  if (j.is_array()) {
    op = dense(matrix(j, ptr), "dense");
  } else if (j.is_object()) {
    const std::string name = text(member(j, "builder", ptr), child(ptr, "builder"));
    const json& p = params_of(j, ptr);
    const std::string pp = child(ptr, "params");
    auto image = [&](int min) {
      const int h = static_cast<int>(integer(member(p, "height", pp), child(pp, "height"), min));
      const int w = static_cast<int>(integer(member(p, "width", pp), child(pp, "width"), min));
      return std::pair<int, int>{h, w};
    };
    if (name == "identity") {
      if (in_dim != out_dim) throw SchemaError(ptr, "identity needs equal input and output dims");
      op = identity(in_dim);
    } else if (name == "zero") {
      op = zero_op(in_dim, out_dim);
    } else if (name == "dense") {
      op = dense(matrix(member(p, "matrix", pp), child(pp, "matrix")), "dense");
    } else if (name == "scaled") {
      const double a = number(member(p, "alpha", pp), child(pp, "alpha"));
      op = scaled(a, parse_linop(member(p, "op", pp), child(pp, "op"), in_dim, out_dim));
    } else if (name == "gradient") {
      auto [h, w] = image(2);
      op = gradient_op(h, w);
    } else if (name == "second_gradient") {
      auto [h, w] = image(3);
      op = second_gradient_op(h, w);
    } else if (name == "haar") {
      auto [h, w] = image(2);
      try {
        op = haar_analysis_op(h, w);
      } catch (const ConfigurationError& e) {
        throw SchemaError(pp, e.what());
      }
    } else if (name == "box_blur") {
      auto [h, w] = image(1);
      const json* r = optional_member(p, "radius", pp);
      op = box_blur_op(h, w, r ? static_cast<int>(integer(*r, child(pp, "radius"), 0)) : 1);
    } else {
      throw SchemaError(child(ptr, "builder"), "unknown operator builder '" + name + "'");
    }
  } else {
    throw SchemaError(ptr, "expected a matrix or a builder object");
  }
  if (op.in_dim() != in_dim || op.out_dim() != out_dim)
    throw SchemaError(ptr, "operator maps " + std::to_string(op.in_dim()) + " -> " + std::to_string(op.out_dim()) +
                               ", expected " + std::to_string(in_dim) + " -> " + std::to_string(out_dim));
  return op;
}

// ---------------------------------------------------------------------------
// Prox catalog

inline std::vector<prox::FidelityTerm> parse_fidelity_terms(const json& p, const std::string& pp, int dim) {
  using namespace detail;
  const json& terms = member(p, "terms", pp);
  const std::string tp = child(pp, "terms");
  if (!terms.is_array() || terms.empty()) throw SchemaError(tp, "expected a non-empty array of terms");
  std::vector<prox::FidelityTerm> out;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const std::string ep = child(tp, t);
    const Vector r = vector(member(terms[t], "r", ep), child(ep, "r"));
    if (r.size() < 1) throw SchemaError(child(ep, "r"), "observation must be non-empty");
    prox::FidelityTerm term{parse_linop(member(terms[t], "T", ep), child(ep, "T"), dim, static_cast<int>(r.size())), r,
                            1.0};
    if (const json* w = optional_member(terms[t], "weight", ep)) {
      term.weight = number(*w, child(ep, "weight"));
      if (term.weight < 0.0) throw SchemaError(child(ep, "weight"), "weight must be >= 0");
    }
    out.push_back(std::move(term));
  }
  return out;
}

inline Blocks parse_blocks(const json& p, const std::string& pp, int dim) {
  using namespace detail;
  if (const json* b = optional_member(p, "blocks", pp)) {
    const std::string bp = child(pp, "blocks");
    if (!b->is_array()) throw SchemaError(bp, "expected an array of index arrays");
    Blocks out;
    for (std::size_t t = 0; t < b->size(); ++t) {
      const std::string ip = child(bp, t);
      if (!(*b)[t].is_array()) throw SchemaError(ip, "expected an array of indices");
      std::vector<int> blk;
      for (std::size_t u = 0; u < (*b)[t].size(); ++u)
        blk.push_back(static_cast<int>(integer((*b)[t][u], child(ip, u), 0)));
      out.push_back(std::move(blk));
    }
    try {
      prox::check_partition(out, dim);
    } catch (const ConfigurationError& e) {
      throw SchemaError(bp, e.what());
    }
    return out;
  }
  try {
    if (const json* s = optional_member(p, "block_size", pp))
      return prox::contiguous_blocks(dim, static_cast<int>(integer(*s, child(pp, "block_size"), 1)));
    if (const json* c = optional_member(p, "channels", pp))
      return prox::interleaved_blocks(dim, static_cast<int>(integer(*c, child(pp, "channels"), 1)));
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw SchemaError(pp, e.what());
  }
  throw SchemaError(pp, "group_l12 needs one of 'blocks', 'block_size' or 'channels'");
}

/// The catalog by name: l1, group_l12, indicator_box, indicator_zero,
/// indicator_affine, quadratic_fidelity, zero_function, scaled_translated.
/// `ptr` locates `params` in error messages.
inline ConvexFunction prox_catalog(const std::string& name, const json& params, int dim, const std::string& ptr = "") {
  using namespace detail;
  if (dim < 1) throw ConfigurationError("prox_catalog: dim must be positive");
  const std::string& pp = ptr;
  auto weight_or = [&](double fallback) {
    const json* w = optional_member(params, "weight", pp);
    return w ? number(*w, child(pp, "weight")) : fallback;
  };
  try {
    if (name == "l1") {
      const json* w = optional_member(params, "weight", pp);
      return prox::l1(w ? scalar_or_vector(*w, child(pp, "weight"), dim) : Vector(Vector::Ones(dim)));
    }
    if (name == "group_l12") return prox::group_l12(dim, parse_blocks(params, pp, dim), weight_or(1.0));
    if (name == "indicator_box") {
      const json* lo = optional_member(params, "lo", pp);
      const json* hi = optional_member(params, "hi", pp);
      return prox::indicator_box(lo ? scalar_or_vector(*lo, child(pp, "lo"), dim) : Vector(Vector::Constant(dim, -kInfinity)),
                                 hi ? scalar_or_vector(*hi, child(pp, "hi"), dim) : Vector(Vector::Constant(dim, kInfinity)));
    }
    if (name == "indicator_zero") return prox::indicator_zero(dim);
    if (name == "zero_function") return prox::zero_function(dim);
    if (name == "indicator_affine") {
      const Matrix E = matrix(member(params, "E", pp), child(pp, "E"));
      if (E.cols() != dim) throw SchemaError(child(pp, "E"), "E must have " + std::to_string(dim) + " columns");
      const Vector d = vector(member(params, "d", pp), child(pp, "d"), static_cast<int>(E.rows()));
      return prox::indicator_affine(E, d);
    }
    if (name == "quadratic_fidelity") return prox::quadratic_fidelity(parse_fidelity_terms(params, pp, dim), dim);
    if (name == "scaled_translated") {
      const json& inner = member(params, "inner", pp);
      const std::string ip = child(pp, "inner");
      const std::string iname = text(member(inner, "prox", ip), child(ip, "prox"));
      const ConvexFunction f = prox_catalog(iname, params_of(inner, ip), dim, child(ip, "params"));
      const json* s = optional_member(params, "scale", pp);
      const json* b = optional_member(params, "offset", pp);
      return prox::scaled_translated(f, s ? number(*s, child(pp, "scale")) : 1.0,
                                     b ? vector(*b, child(pp, "offset"), dim) : Vector(Vector::Zero(dim)));
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw SchemaError(pp, e.what());
  }
  throw ConfigurationError("prox_catalog: unknown prox '" + name + "'");
}

/// {"prox": name, "params": {...}}
inline ConvexFunction parse_function(const json& entry, const std::string& ptr, int dim) {
  using namespace detail;
  const std::string name = text(member(entry, "prox", ptr), child(ptr, "prox"));
  try {
    return prox_catalog(name, params_of(entry, ptr), dim, child(ptr, "params"));
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw SchemaError(child(ptr, "prox"), e.what());
  }
}

/// {"smooth": "zero"} or {"smooth": "quadratic_fidelity", "params": {"terms": [...]}}
inline SmoothFunction parse_smooth(const json& entry, const std::string& ptr, int dim) {
  using namespace detail;
  const std::string name = text(member(entry, "smooth", ptr), child(ptr, "smooth"));
  if (name == "zero") return prox::zero_smooth(dim);
  if (name == "quadratic_fidelity")
    return prox::smooth_quadratic_fidelity(parse_fidelity_terms(params_of(entry, ptr), child(ptr, "params"), dim), dim);
  throw SchemaError(child(ptr, "smooth"), "unknown smooth term '" + name + "'");
}

// ---------------------------------------------------------------------------
// Problem files

struct SolverConfig {
  std::optional<double> epsilon;
  std::optional<double> gamma;
  double tol = 1e-8;
  long max_iter = 100000;
  std::uint64_t seed = 42;
  long trace_every = 1;
};

struct ErrorConfig {
  std::string schedule = "zero";
  double rho = 0.9;
  double amplitude = 0.1;
};

struct Problem {
  int version = 1;
  std::string kind;  // "inclusion" or "minimization"
  SystemSpec system;
  std::optional<MinimizationSpec> minimization;
  SolverConfig solver;
  ErrorConfig errors;
  std::optional<BlockVector> reference;  // known primal solution, optional
};

namespace detail {

inline BlockVector blocks_or_zero(const json& root, const std::string& key, const std::vector<int>& d) {
  const json* j = optional_member(root, key, "");
  if (!j) return zero_blocks(d);
  const std::string p = child("", key);
  if (!j->is_array() || j->size() != d.size())
    throw SchemaError(p, "expected " + std::to_string(d.size()) + " blocks");
  BlockVector out;
  for (std::size_t t = 0; t < d.size(); ++t) out.push_back(vector((*j)[t], child(p, t), d[t]));
  return out;
}

template <class F>
auto per_block(const json& root, const std::string& key, std::size_t count, F&& make) {
  const std::string p = child("", key);
  const json& arr = member(root, key, "");
  if (!arr.is_array() || arr.size() != count) throw SchemaError(p, "expected " + std::to_string(count) + " entries");
  std::vector<decltype(make(arr[0], p, std::size_t{0}))> out;
  for (std::size_t t = 0; t < count; ++t) out.push_back(make(arr[t], child(p, t), t));
  return out;
}

}  // namespace detail

inline Problem parse_problem(const json& root) {
  using namespace detail;
  if (!root.is_object()) throw SchemaError("", "problem file must be a JSON object");
  Problem pr;
  pr.version = static_cast<int>(integer(member(root, "version", ""), "/version", 1));
  if (pr.version != 1) throw SchemaError("/version", "unsupported version " + std::to_string(pr.version));
  pr.kind = text(member(root, "kind", ""), "/kind");
  if (pr.kind != "inclusion" && pr.kind != "minimization")
    throw SchemaError("/kind", "must be \"inclusion\" or \"minimization\"");

  SpaceLayout lay;
  const json& jl = member(root, "layout", "");
  lay.h_dims = dims(member(jl, "h", "/layout"), "/layout/h");
  lay.g_dims = dims(member(jl, "g", "/layout"), "/layout/g");
  lay.y_dims = dims(member(jl, "y", "/layout"), "/layout/y");
  lay.x_dims = dims(member(jl, "x", "/layout"), "/layout/x");
  if (auto msg = lay.check(); !msg.empty()) throw SchemaError("/layout", msg);
  const std::size_t m = lay.m(), s = lay.s();

  const BlockVector z = blocks_or_zero(root, "z", lay.h_dims);
  const BlockVector r = blocks_or_zero(root, "r", lay.g_dims);
  auto Ms = per_block(root, "M", s, [&](const json& j, const std::string& p, std::size_t k) {
    return parse_linop(j, p, lay.g_dims[k], lay.y_dims[k]);
  });
  auto Ns = per_block(root, "N", s, [&](const json& j, const std::string& p, std::size_t k) {
    return parse_linop(j, p, lay.g_dims[k], lay.x_dims[k]);
  });
  auto Ls = per_block(root, "L", s, [&](const json& row, const std::string& p, std::size_t k) {
    if (!row.is_array() || row.size() != m) throw SchemaError(p, "expected " + std::to_string(m) + " operators");
    std::vector<LinOp> ops;
    for (std::size_t i = 0; i < m; ++i) ops.push_back(parse_linop(row[i], child(p, i), lay.h_dims[i], lay.g_dims[k]));
    return ops;
  });

  const char* fa = pr.kind == "minimization" ? "f" : "A";
  const char* fb = pr.kind == "minimization" ? "g" : "B";
  const char* fd = pr.kind == "minimization" ? "ell" : "D";
  const char* fc = pr.kind == "minimization" ? "phi" : "C";
  auto fs = per_block(root, fa, m, [&](const json& j, const std::string& p, std::size_t i) {
    return parse_function(j, p, lay.h_dims[i]);
  });
  auto gs = per_block(root, fb, s, [&](const json& j, const std::string& p, std::size_t k) {
    return parse_function(j, p, lay.y_dims[k]);
  });
  auto ls = per_block(root, fd, s, [&](const json& j, const std::string& p, std::size_t k) {
    return parse_function(j, p, lay.x_dims[k]);
  });
  const int H = lay.total_h();
  SmoothFunction phi;
  if (const json* c = optional_member(root, fc, "")) {
    if (H == 0) throw SchemaError(child("", fc), "smooth term requires at least one primal block");
    phi = parse_smooth(*c, child("", fc), H);
  } else {
    phi = H > 0 ? prox::zero_smooth(H) : SmoothFunction{};
  }

  if (pr.kind == "minimization") {
    if (m == 0) throw SchemaError("/layout/h", "a minimization problem needs at least one primal block");
    MinimizationSpec ms;
    ms.layout = lay;
    ms.f = fs;
    ms.phi = phi;
    ms.g = gs;
    ms.ell = ls;
    ms.M = Ms;
    ms.N = Ns;
    ms.L = Ls;
    ms.z = z;
    ms.r = r;
    pr.system = build_system(ms);
    pr.minimization = std::move(ms);
  } else {
    SystemSpec& sp = pr.system;
    sp.layout = lay;
    sp.z = z;
    sp.r = r;
    for (auto& f : fs) sp.A.push_back(f.prox);
    for (auto& g : gs) sp.B.push_back(g.prox);
    for (auto& l : ls) sp.D.push_back(l.prox);
    sp.C = m > 0 ? gradient_coupling(phi.gradient, phi.nu0, lay.h_dims) : zero_coupling({});
    sp.M = Ms;
    sp.N = Ns;
    sp.L = Ls;
  }

  if (const json* js = optional_member(root, "solver", "")) {
    const std::string p = "/solver";
    if (!js->is_object()) throw SchemaError(p, "expected an object");
    SolverConfig& c = pr.solver;
    if (const json* v = optional_member(*js, "epsilon", p)) c.epsilon = number(*v, child(p, "epsilon"));
    if (const json* v = optional_member(*js, "gamma", p)) c.gamma = number(*v, child(p, "gamma"));
    if (const json* v = optional_member(*js, "tol", p)) c.tol = number(*v, child(p, "tol"));
    if (const json* v = optional_member(*js, "max_iter", p)) c.max_iter = integer(*v, child(p, "max_iter"), 0);
    if (const json* v = optional_member(*js, "seed", p)) c.seed = static_cast<std::uint64_t>(integer(*v, child(p, "seed"), 0));
    if (const json* v = optional_member(*js, "trace_every", p)) c.trace_every = integer(*v, child(p, "trace_every"), 1);
    if (c.tol < 0.0) throw SchemaError(child(p, "tol"), "must be >= 0");
  }
  if (const json* je = optional_member(root, "errors", "")) {
    const std::string p = "/errors";
    ErrorConfig& e = pr.errors;
    e.schedule = text(member(*je, "schedule", p), child(p, "schedule"));
    if (e.schedule == "geometric") {
      if (const json* v = optional_member(*je, "rho", p)) e.rho = number(*v, child(p, "rho"));
      if (const json* v = optional_member(*je, "amplitude", p)) e.amplitude = number(*v, child(p, "amplitude"));
      if (!(e.rho >= 0.0 && e.rho < 1.0)) throw SchemaError(child(p, "rho"), "must lie in [0, 1)");
      if (!(e.amplitude >= 0.0)) throw SchemaError(child(p, "amplitude"), "must be >= 0");
    } else if (e.schedule != "zero") {
      throw SchemaError(child(p, "schedule"), "unknown error schedule '" + e.schedule + "'");
    }
  }
  if (const json* jr = optional_member(root, "reference", "")) {
    const std::string p = "/reference";
    const json& x = member(*jr, "x", p);
    if (!x.is_array() || x.size() != m) throw SchemaError(child(p, "x"), "expected " + std::to_string(m) + " blocks");
    BlockVector ref;
    for (std::size_t i = 0; i < m; ++i) ref.push_back(vector(x[i], child(child(p, "x"), i), lay.h_dims[i]));
    pr.reference = std::move(ref);
  }
  return pr;
}

inline Problem load_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigurationError("cannot open problem file '" + path + "'");
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_problem(root);
}

inline ErrorSchedule make_errors(const ErrorConfig& e, std::uint64_t seed) {
  if (e.schedule == "geometric") return geometric_errors(e.rho, e.amplitude, seed);
  return zero_errors();
}

// ---------------------------------------------------------------------------
// Running and artifacts

struct RunReport {
  SolveResult result;
  double beta = 0.0;
  double epsilon = 0.0;
  double gamma = 0.0;
  double wall_time = 0.0;  // seconds
  std::string error_schedule;
  std::optional<double> reference_error;  // max-norm distance of x1 to the reference
};

/// Validates, derives beta and the step policy, and solves. Throws on
/// validation failure or an inadmissible step configuration (before any iteration).
inline RunReport run(const SystemSpec& spec, const SolverConfig& cfg, const ErrorSchedule& errors,
                     std::optional<IterateState> init = std::nullopt) {
  if (auto v = validate(spec); !v.empty()) {
    std::string msg = "spec validation failed:";
    for (const auto& x : v) msg += "\n  " + x.path + ": " + x.message;
    throw SpecificationError(msg);
  }
  RunReport rep;
  PowerIterationOptions po;
  po.seed = cfg.seed;
  rep.beta = compute_beta(spec, po);
  rep.epsilon = cfg.epsilon.value_or(default_epsilon(rep.beta));
  const StepPolicy policy = make_policy(rep.beta, rep.epsilon, cfg.gamma);
  rep.gamma = policy.gamma(0);
  rep.error_schedule = errors.description;
  const auto t0 = std::chrono::steady_clock::now();
  rep.result = solve(spec, init.value_or(IterateState::zeros(spec.layout)), policy, errors,
                     StopRule{cfg.tol, cfg.max_iter, cfg.trace_every});
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline double max_abs_difference(const BlockVector& a, const BlockVector& b) {
  if (a.size() != b.size()) throw SpecificationError("max_abs_difference: block counts differ");
  double e = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].size() != b[j].size()) throw SpecificationError("max_abs_difference: block sizes differ");
    if (a[j].size() > 0) e = std::max(e, (a[j] - b[j]).lpNorm<Eigen::Infinity>());
  }
  return e;
}

inline RunReport run_problem(const Problem& pr) {
  RunReport rep = run(pr.system, pr.solver, make_errors(pr.errors, pr.solver.seed));
  if (pr.reference) rep.reference_error = max_abs_difference(rep.result.final_state.x1, *pr.reference);
  return rep;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index t = 0; t < v.size(); ++t) a.push_back(v[t]);
  return a;
}

inline json to_json(const BlockVector& b) {
  json a = json::array();
  for (const auto& v : b) a.push_back(to_json(v));
  return a;
}

inline json state_json(const IterateState& st) {
  return {{"n", st.n}, {"x1", to_json(st.x1)}, {"x2", to_json(st.x2)}, {"v1", to_json(st.v1)}, {"v2", to_json(st.v2)}};
}

inline json solution_json(const SolutionPair& sol) { return {{"xbar", to_json(sol.xbar)}, {"vbar", to_json(sol.vbar)}}; }

/// Non-finite numbers have no JSON spelling; they are written as strings.
inline json number_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline json summary_json(const RunReport& rep) {
  const SolveResult& r = rep.result;
  json j{{"status", to_string(r.status)},
         {"iterations", r.iterations},
         {"final_displacement", number_json(r.final_displacement)},
         {"transversality_defect", number_json(r.transversality_defect)},
         {"beta", rep.beta},
         {"epsilon", rep.epsilon},
         {"gamma", rep.gamma},
         {"gamma_interval", {rep.epsilon, (1.0 - rep.epsilon) / rep.beta}},
         {"partial_sums", {r.partial_sums[0], r.partial_sums[1], r.partial_sums[2], r.partial_sums[3]}},
         {"error_schedule", rep.error_schedule},
         {"wall_time_s", rep.wall_time}};
  if (!r.message.empty()) j["message"] = r.message;
  if (rep.reference_error) j["reference_error"] = *rep.reference_error;
  return j;
}

inline constexpr const char* kTraceHeader =
    "n,gamma,displacement,dx1,dx2,dv1,dv2,sum_dx1,sum_dx2,sum_dv1,sum_dv2,transversality_defect";

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << kTraceHeader << '\n';
  os << std::setprecision(17);
  for (const auto& t : trace) {
    os << t.n << ',' << t.gamma << ',' << t.displacement;
    for (double d : t.block_displacements) os << ',' << d;
    for (double s : t.partial_sums) os << ',' << s;
    os << ',' << t.transversality_defect << '\n';
  }
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// trace.csv, solution.json, summary.json and state.json in `dir` (which must exist).
inline void write_artifacts(const std::string& dir, const SystemSpec& spec, const RunReport& rep) {
  std::ostringstream csv;
  write_trace_csv(csv, rep.result.trace);
  write_text(dir + "/trace.csv", csv.str());
  write_json(dir + "/solution.json", solution_json(extract_solution(rep.result.final_state, spec)));
  write_json(dir + "/summary.json", summary_json(rep));
  write_json(dir + "/state.json", state_json(rep.result.final_state));
}

}  // namespace fbf::io
