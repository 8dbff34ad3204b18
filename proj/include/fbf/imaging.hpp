#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fbf/core.hpp"
#include "fbf/linop.hpp"
#include "fbf/minimization.hpp"
#include "fbf/prox.hpp"

namespace fbf {

/// Row-major image: pixel (i, j) lives at i * width + j.
struct ImageGrid {
  int height = 0;
  int width = 0;
  Vector pixels;

  ImageGrid() = default;
  ImageGrid(int h, int w, Vector px) : height(h), width(w), pixels(std::move(px)) {
    if (h < 1 || w < 1) throw ConfigurationError("ImageGrid: dimensions must be positive");
    if (pixels.size() != static_cast<Eigen::Index>(h) * w) throw ConfigurationError("ImageGrid: pixel count mismatch");
  }
  ImageGrid(int h, int w, double fill) : ImageGrid(h, w, Vector::Constant(static_cast<Eigen::Index>(h) * w, fill)) {}

  int size() const { return height * width; }
  double& at(int i, int j) { return pixels[i * width + j]; }
  double at(int i, int j) const { return pixels[i * width + j]; }
};

struct ObservationSet {
  std::vector<Vector> observations;
  std::vector<LinOp> blur_ops;
  std::vector<double> weights;

  std::size_t size() const { return observations.size(); }
  void check(int image_dim) const {
    if (blur_ops.size() != observations.size() || weights.size() != observations.size())
      throw ConfigurationError("ObservationSet: observations, blur_ops and weights must have equal length");
    for (std::size_t k = 0; k < observations.size(); ++k) {
      if (blur_ops[k].in_dim() != image_dim)
        throw ConfigurationError("ObservationSet: T[" + std::to_string(k) + "] does not act on the image space");
      if (blur_ops[k].out_dim() != observations[k].size())
        throw ConfigurationError("ObservationSet: r[" + std::to_string(k) + "] length does not match T output");
      if (!(weights[k] > 0.0)) throw ConfigurationError("ObservationSet: weights must be positive");
    }
  }
};

namespace detail {

// Forward differences with replicate boundary: the last row (column) has zero difference.
inline void diff_v(const double* x, double* out, int h, int w) {
  for (int p = 0; p < (h - 1) * w; ++p) out[p] = x[p + w] - x[p];
  std::fill(out + (h - 1) * w, out + h * w, 0.0);
}

inline void diff_h(const double* x, double* out, int h, int w) {
  for (int i = 0; i < h; ++i) {
    const double* xr = x + i * w;
    double* orow = out + i * w;
    for (int j = 0; j + 1 < w; ++j) orow[j] = xr[j + 1] - xr[j];
    orow[w - 1] = 0.0;
  }
}

// Adjoints (negative divergence), accumulated into out.
inline void diff_v_adj(const double* u, double* out, int h, int w) {
  for (int p = 0; p < (h - 1) * w; ++p) {
    out[p] -= u[p];
    out[p + w] += u[p];
  }
}

inline void diff_h_adj(const double* u, double* out, int h, int w) {
  for (int i = 0; i < h; ++i) {
    const double* ur = u + i * w;
    double* orow = out + i * w;
    for (int j = 0; j + 1 < w; ++j) {
      orow[j] -= ur[j];
      orow[j + 1] += ur[j];
    }
  }
}

inline void check_image_dims(int h, int w, int min, const char* who) {
  if (h < min || w < min)
    throw ConfigurationError(std::string(who) + ": height and width must be >= " + std::to_string(min));
}

}  // namespace detail

/// Discrete gradient: [vertical; horizontal] forward differences, 2 * h * w outputs.
inline LinOp gradient_op(int height, int width) {
  detail::check_image_dims(height, width, 2, "gradient_op");
  const int n = height * width;
  return LinOp(
      n, 2 * n,
      [height, width, n](const Vector& x) -> Vector {
        Vector out(2 * n);
        detail::diff_v(x.data(), out.data(), height, width);
        detail::diff_h(x.data(), out.data() + n, height, width);
        return out;
      },
      [height, width, n](const Vector& u) -> Vector {
        Vector out = Vector::Zero(n);
        detail::diff_v_adj(u.data(), out.data(), height, width);
        detail::diff_h_adj(u.data() + n, out.data(), height, width);
        return out;
      },
      "grad");
}

/// blockdiag(grad, grad) o grad: channels [vv, hv, vh, hh], 4 * h * w outputs.
inline LinOp second_gradient_op(int height, int width) {
  detail::check_image_dims(height, width, 3, "second_gradient_op");
  const int n = height * width;
  return LinOp(
      n, 4 * n,
      [height, width, n](const Vector& x) -> Vector {
        Vector d(2 * n);
        detail::diff_v(x.data(), d.data(), height, width);
        detail::diff_h(x.data(), d.data() + n, height, width);
        Vector out(4 * n);
        detail::diff_v(d.data(), out.data(), height, width);
        detail::diff_h(d.data(), out.data() + n, height, width);
        detail::diff_v(d.data() + n, out.data() + 2 * n, height, width);
        detail::diff_h(d.data() + n, out.data() + 3 * n, height, width);
        return out;
      },
      [height, width, n](const Vector& u) -> Vector {
        Vector d = Vector::Zero(2 * n);
        detail::diff_v_adj(u.data(), d.data(), height, width);
        detail::diff_h_adj(u.data() + n, d.data(), height, width);
        detail::diff_v_adj(u.data() + 2 * n, d.data() + n, height, width);
        detail::diff_h_adj(u.data() + 3 * n, d.data() + n, height, width);
        Vector out = Vector::Zero(n);
        detail::diff_v_adj(d.data(), out.data(), height, width);
        detail::diff_h_adj(d.data() + n, out.data(), height, width);
        return out;
      },
      "grad2");
}

/// Single-level orthonormal 2-D Haar analysis. Output subbands [LL, LH, HL, HH],
/// each (h/2) x (w/2) row-major. The adjoint is the synthesis (inverse) map.
inline LinOp haar_analysis_op(int height, int width) {
  if (height < 2 || width < 2 || height % 2 != 0 || width % 2 != 0)
    throw ConfigurationError("haar_analysis_op: height and width must be even and >= 2");
  const int n = height * width;
  const int hh = height / 2, hw = width / 2, q = hh * hw;
  return LinOp(
      n, n,
      [width, hh, hw, q, n](const Vector& x) -> Vector {
        Vector out(n);
        for (int i = 0; i < hh; ++i)
          for (int j = 0; j < hw; ++j) {
            const double a = x[(2 * i) * width + 2 * j], b = x[(2 * i) * width + 2 * j + 1];
            const double c = x[(2 * i + 1) * width + 2 * j], d = x[(2 * i + 1) * width + 2 * j + 1];
            const int p = i * hw + j;
            out[p] = 0.5 * (a + b + c + d);
            out[q + p] = 0.5 * (a - b + c - d);
            out[2 * q + p] = 0.5 * (a + b - c - d);
            out[3 * q + p] = 0.5 * (a - b - c + d);
          }
        return out;
      },
      [width, hh, hw, q, n](const Vector& u) -> Vector {
        Vector out(n);
        for (int i = 0; i < hh; ++i)
          for (int j = 0; j < hw; ++j) {
            const int p = i * hw + j;
            const double ll = u[p], lh = u[q + p], hl = u[2 * q + p], h2 = u[3 * q + p];
            out[(2 * i) * width + 2 * j] = 0.5 * (ll + lh + hl + h2);
            out[(2 * i) * width + 2 * j + 1] = 0.5 * (ll - lh + hl - h2);
            out[(2 * i + 1) * width + 2 * j] = 0.5 * (ll + lh - hl - h2);
            out[(2 * i + 1) * width + 2 * j + 1] = 0.5 * (ll - lh - hl + h2);
          }
        return out;
      },
      "haar");
}

/// Symmetric (2r+1)x(2r+1) box average with replicate boundary, applied as
/// a horizontal then a vertical 1-D pass. The adjoint scatters each output
/// back onto the clamped source pixels.
inline LinOp box_blur_op(int height, int width, int radius = 1) {
  detail::check_image_dims(height, width, 1, "box_blur_op");
  if (radius < 0) throw ConfigurationError("box_blur_op: radius must be >= 0");
  const int n = height * width;
  const double wgt = 1.0 / (2 * radius + 1);
  // Clamped source offsets per row / column position, so the passes are branch-free.
  auto taps = [radius](int len) {
    std::vector<int> t;
    for (int p = 0; p < len; ++p)
      for (int d = -radius; d <= radius; ++d) t.push_back(std::clamp(p + d, 0, len - 1));
    return t;
  };
  const int nt = 2 * radius + 1;
  auto th = std::make_shared<const std::vector<int>>(taps(width));
  auto tv = std::make_shared<const std::vector<int>>(taps(height));
  auto pass_h = [=](const double* x, double* out) {
    const int* tp = th->data();
    for (int i = 0; i < height; ++i) {
      const double* xr = x + i * width;
      double* orow = out + i * width;
      for (int j = 0; j < width; ++j) {
        double s = 0.0;
        for (int t = 0; t < nt; ++t) s += xr[tp[j * nt + t]];
        orow[j] = wgt * s;
      }
    }
  };
  auto pass_v = [=](const double* x, double* out) {
    const int* tp = tv->data();
    for (int i = 0; i < height; ++i) {
      double* orow = out + i * width;
      std::fill(orow, orow + width, 0.0);
      for (int t = 0; t < nt; ++t) {
        const double* xr = x + tp[i * nt + t] * width;
        for (int j = 0; j < width; ++j) orow[j] += xr[j];
      }
      for (int j = 0; j < width; ++j) orow[j] *= wgt;
    }
  };
  auto scatter_h = [=](const double* y, double* out) {
    const int* tp = th->data();
    std::fill(out, out + n, 0.0);
    for (int i = 0; i < height; ++i) {
      const double* yr = y + i * width;
      double* orow = out + i * width;
      for (int j = 0; j < width; ++j) {
        const double w = wgt * yr[j];
        for (int t = 0; t < nt; ++t) orow[tp[j * nt + t]] += w;
      }
    }
  };
  auto scatter_v = [=](const double* y, double* out) {
    const int* tp = tv->data();
    std::fill(out, out + n, 0.0);
    for (int i = 0; i < height; ++i)
      for (int t = 0; t < nt; ++t) {
        double* orow = out + tp[i * nt + t] * width;
        const double* yr = y + i * width;
        for (int j = 0; j < width; ++j) orow[j] += wgt * yr[j];
      }
  };
  return LinOp(
      n, n,
      [=](const Vector& x) -> Vector {
        Vector tmp(n), out(n);
        pass_h(x.data(), tmp.data());
        pass_v(tmp.data(), out.data());
        return out;
      },
      [=](const Vector& y) -> Vector {
        Vector tmp(n), out(n);
        scatter_v(y.data(), tmp.data());
        scatter_h(tmp.data(), out.data());
        return out;
      },
      "box_blur");
}

struct App1Params {
  double alpha = 0.0;  // first-order TV weight
  double beta = 0.0;   // second-order TV weight
  double gamma = 0.0;  // wavelet l1 weight
  double lo = 0.0;
  double hi = 1.0;
  double feasibility_tol = 1e-5;
};

/// Mapping s = 2, m = 1, L_11 = L_21 = Id:
///   f_1 = indicator of [lo, hi]^K, phi = sum_k w_k / 2 ||r_k - T_k x||^2,
///   g_1 = alpha ||.||_{1,2} on (vertical, horizontal) pairs, M_1 = grad,
///   ell_1 = beta ||.||_{1,2} on the 4 second-order channels, N_1 = grad2,
///   g_2 = gamma ||.||_1, M_2 = haar, ell_2 = indicator of {0}, N_2 = Id.
inline MinimizationSpec build_app1_instance(const ImageGrid& truth, const ObservationSet& obs, const App1Params& p) {
  const int h = truth.height, w = truth.width, K = truth.size();
  if (K < 1) throw ConfigurationError("build_app1_instance: empty image");
  if (p.alpha < 0.0 || p.beta < 0.0 || p.gamma < 0.0)
    throw ConfigurationError("build_app1_instance: regularization weights must be nonnegative");
  if (!(p.lo <= p.hi)) throw ConfigurationError("build_app1_instance: box requires lo <= hi");
  if (obs.size() == 0) throw ConfigurationError("build_app1_instance: at least one observation is required");
  obs.check(K);

  MinimizationSpec ms;
  ms.layout.h_dims = {K};
  ms.layout.g_dims = {K, K};
  ms.layout.y_dims = {2 * K, K};
  ms.layout.x_dims = {4 * K, K};

  ms.f = {prox::indicator_box(K, p.lo, p.hi, p.feasibility_tol)};
  std::vector<prox::FidelityTerm> terms;
  for (std::size_t k = 0; k < obs.size(); ++k) terms.push_back({obs.blur_ops[k], obs.observations[k], obs.weights[k]});
  ms.phi = prox::smooth_quadratic_fidelity(terms, K, false);

  ms.g = {prox::group_l12(2 * K, prox::interleaved_blocks(2 * K, 2), p.alpha, p.feasibility_tol),
          prox::l1(K, p.gamma, p.feasibility_tol)};
  ms.ell = {prox::group_l12(4 * K, prox::interleaved_blocks(4 * K, 4), p.beta, p.feasibility_tol),
            prox::indicator_zero(K, p.feasibility_tol)};
  ms.M = {gradient_op(h, w), haar_analysis_op(h, w)};
  ms.N = {second_gradient_op(h, w), identity(K)};
  ms.L = {{identity(K)}, {identity(K)}};
  ms.z = {Vector::Zero(K)};
  ms.r = {Vector::Zero(K), Vector::Zero(K)};
  return ms;
}

// ---------------------------------------------------------------------------
// Deblur demo data

/// 16x16-style piecewise-constant phantom: a bright square and a dimmer disc on a dark background.
inline ImageGrid phantom(int height, int width) {
  ImageGrid img(height, width, 0.1);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      if (i >= height / 8 && i < height / 2 && j >= width / 8 && j < width / 2) img.at(i, j) = 0.9;
      const double di = i - 0.7 * height, dj = j - 0.65 * width;
      if (di * di + dj * dj <= 0.05 * height * width) img.at(i, j) = 0.6;
    }
  return img;
}

struct DeblurData {
  ImageGrid truth;
  ImageGrid observed;
  ObservationSet obs;
};

/// p = 1 observation r = T x + noise with T the 3x3 box blur and noise ~ N(0, sigma^2).
inline DeblurData make_deblur_data(int height, int width, double sigma, std::uint64_t seed) {
  DeblurData d;
  d.truth = phantom(height, width);
  const LinOp T = box_blur_op(height, width, 1);
  std::mt19937_64 rng(mix_seed(seed, 0xB1u));
  const Vector r = T.apply(d.truth.pixels) + sigma * random_normal(d.truth.size(), rng);
  d.observed = ImageGrid(height, width, r);
  d.obs.observations = {r};
  d.obs.blur_ops = {T};
  d.obs.weights = {1.0};
  return d;
}

// ---------------------------------------------------------------------------
// PGM (P5, 8-bit); pixel values are mapped from [0, 1].

inline void write_pgm(const std::string& path, const ImageGrid& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (int p = 0; p < img.size(); ++p) {
    const double v = std::clamp(img.pixels[p], 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
  if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline ImageGrid read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pgm: cannot open " + path);
  auto token = [&is]() {
    std::string t;
    while (is >> std::ws && is.peek() == '#') std::getline(is, t);
    is >> t;
    return t;
  };
  if (token() != "P5") throw ConfigurationError("read_pgm: only binary P5 images are supported");
  const int w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw ConfigurationError("read_pgm: unsupported header");
  is.get();
  ImageGrid img(h, w, 0.0);
  for (int p = 0; p < img.size(); ++p) {
    const int c = is.get();
    if (c == EOF) throw ConfigurationError("read_pgm: truncated pixel data");
    img.pixels[p] = static_cast<double>(c) / maxval;
  }
  return img;
}

}  // namespace fbf
