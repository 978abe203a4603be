#pragma once

// Uniform grids on subintervals of [0, pi], complex-valued grid functions,
// and the causal convolution algebra (product-trapezoidal rule) that the
// rest of the library is built on.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dirackit/errors.hpp"

namespace dirackit {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

//------------------------------------------------------------------------
// Grid
//------------------------------------------------------------------------

struct Grid {
  int n = 0;         // number of nodes, >= 2
  double x0 = 0.0;   // 0 <= x0 < x1 <= pi
  double x1 = 0.0;

  Grid() = default;
  Grid(double x0_, double x1_, int n_) : n(n_), x0(x0_), x1(x1_) {
    if (n < 2) throw invalid_argument_error("Grid: need at least 2 nodes");
    if (!(x0 >= -1e-12 && x0 < x1 && x1 <= kPi + 1e-12))
      throw invalid_argument_error("Grid: endpoints must satisfy 0 <= x0 < x1 <= pi");
  }

  double step() const { return (x1 - x0) / (n - 1); }
  double node(int j) const {
    return j == n - 1 ? x1 : x0 + (x1 - x0) * static_cast<double>(j) / (n - 1);
  }

  bool operator==(const Grid& o) const {
    return n == o.n && std::abs(x0 - o.x0) <= 1e-12 && std::abs(x1 - o.x1) <= 1e-12;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }

  bool starts_at_zero() const { return std::abs(x0) <= 1e-12; }
  bool is_full_interval() const { return starts_at_zero() && std::abs(x1 - kPi) <= 1e-12; }

  /// Index of abscissa x if it is a node; throws otherwise.
  int index_of(double x) const {
    const double r = (x - x0) / step();
    const int j = static_cast<int>(std::lround(r));
    if (j < 0 || j >= n || std::abs(r - j) > 1e-8)
      throw grid_mismatch_error("Grid: abscissa is not a node");
    return j;
  }

  /// Subgrid spanning nodes [j0, j1] of this grid.
  Grid subgrid(int j0, int j1) const {
    if (j0 < 0 || j1 >= n || j1 - j0 < 1)
      throw invalid_argument_error("Grid: bad subgrid node range");
    return Grid(node(j0), node(j1), j1 - j0 + 1);
  }

  std::string describe() const {
    std::ostringstream os;
    os << "[" << x0 << ", " << x1 << "] n=" << n;
    return os.str();
  }
};

/// Smallest n' >= n with (n' - 1) divisible by m, so that a = pi - pi/m and
/// b = pi - a land exactly on nodes of the full-interval grid.
inline int aligned_grid_size(int n, int m) {
  if (n < 2 || m < 1) throw invalid_argument_error("aligned_grid_size: bad arguments");
  while ((n - 1) % m != 0) ++n;
  return n;
}

//------------------------------------------------------------------------
// GridFunction
//------------------------------------------------------------------------

class GridFunction {
 public:
  GridFunction() = default;

  GridFunction(Grid grid, std::vector<cplx> values)
      : grid_(grid), v_(std::move(values)) {
    if (static_cast<int>(v_.size()) != grid_.n)
      throw invalid_argument_error("GridFunction: value count does not match grid");
    ensure_finite();
  }

  static GridFunction zeros(const Grid& g) {
    return GridFunction(g, std::vector<cplx>(g.n, cplx(0.0, 0.0)));
  }

  static GridFunction constant(const Grid& g, cplx c) {
    return GridFunction(g, std::vector<cplx>(g.n, c));
  }

  template <typename F>
  static GridFunction sample(const Grid& g, F&& f) {
    std::vector<cplx> v(g.n);
    for (int j = 0; j < g.n; ++j) v[j] = cplx(f(g.node(j)));
    return GridFunction(g, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  int size() const { return grid_.n; }
  const std::vector<cplx>& values() const { return v_; }
  std::vector<cplx>& values() { return v_; }
  cplx operator[](int j) const { return v_[j]; }
  cplx& operator[](int j) { return v_[j]; }

  void ensure_finite() const {
    for (const cplx& z : v_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw numeric_range_error("GridFunction: non-finite value");
  }

 private:
  Grid grid_;
  std::vector<cplx> v_;
};

namespace detail {

inline void require_same_grid(const GridFunction& f, const GridFunction& g,
                              const char* who) {
  if (f.grid() != g.grid())
    throw grid_mismatch_error(std::string(who) + ": operands on different grids");
}

}  // namespace detail

//------------------------------------------------------------------------
// Pointwise algebra
//------------------------------------------------------------------------

inline GridFunction operator+(const GridFunction& f, const GridFunction& g) {
  detail::require_same_grid(f, g, "operator+");
  std::vector<cplx> v(f.size());
  for (int j = 0; j < f.size(); ++j) v[j] = f[j] + g[j];
  return GridFunction(f.grid(), std::move(v));
}

inline GridFunction operator-(const GridFunction& f, const GridFunction& g) {
  detail::require_same_grid(f, g, "operator-");
  std::vector<cplx> v(f.size());
  for (int j = 0; j < f.size(); ++j) v[j] = f[j] - g[j];
  return GridFunction(f.grid(), std::move(v));
}

inline GridFunction operator*(cplx a, const GridFunction& f) {
  std::vector<cplx> v(f.size());
  for (int j = 0; j < f.size(); ++j) v[j] = a * f[j];
  return GridFunction(f.grid(), std::move(v));
}

inline GridFunction operator-(const GridFunction& f) { return cplx(-1.0) * f; }

//------------------------------------------------------------------------
// Quadrature and norms (trapezoidal throughout)
//------------------------------------------------------------------------

inline cplx trapz(const GridFunction& f) {
  const int n = f.size();
  cplx s = 0.5 * (f[0] + f[n - 1]);
  for (int j = 1; j < n - 1; ++j) s += f[j];
  return s * f.grid().step();
}

inline double l2_norm(const GridFunction& f) {
  const int n = f.size();
  double s = 0.5 * (std::norm(f[0]) + std::norm(f[n - 1]));
  for (int j = 1; j < n - 1; ++j) s += std::norm(f[j]);
  return std::sqrt(s * f.grid().step());
}

inline double sup_norm(const GridFunction& f) {
  double m = 0.0;
  for (const cplx& z : f.values()) m = std::max(m, std::abs(z));
  return m;
}

//------------------------------------------------------------------------
// restrict / reflect
//------------------------------------------------------------------------

/// Restriction to an aligned subgrid (nodes of `sub` must be nodes of f).
inline GridFunction restrict_to(const GridFunction& f, const Grid& sub) {
  const Grid& g = f.grid();
  const double h = g.step();
  const double roff = (sub.x0 - g.x0) / h;
  const double rstride = sub.step() / h;
  const int off = static_cast<int>(std::lround(roff));
  const int stride = static_cast<int>(std::lround(rstride));
  if (stride < 1 || std::abs(roff - off) > 1e-8 || std::abs(rstride - stride) > 1e-8 ||
      off < 0 || off + stride * (sub.n - 1) > g.n - 1)
    throw grid_mismatch_error("restrict_to: subgrid nodes are not nodes of the function");
  std::vector<cplx> v(sub.n);
  for (int j = 0; j < sub.n; ++j) v[j] = f[off + stride * j];
  return GridFunction(sub, std::move(v));
}

/// t |-> f(pi - t). A function on [x0, x1] maps to one on [pi - x1, pi - x0].
inline GridFunction reflect(const GridFunction& f) {
  const Grid& g = f.grid();
  Grid rg(kPi - g.x1, kPi - g.x0, g.n);
  std::vector<cplx> v(f.values().rbegin(), f.values().rend());
  return GridFunction(rg, std::move(v));
}

//------------------------------------------------------------------------
// Convolution (product-trapezoidal; FFT fast path above a size threshold)
//------------------------------------------------------------------------

namespace detail {

// Iterative radix-2 complex FFT, in place. inverse=true applies 1/N.
inline void fft(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw invalid_argument_error("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cplx u = a[i + j];
        const cplx v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (cplx& z : a) z /= static_cast<double>(n);
}

// Full linear convolution c[j] = sum_{k<=j} f[k] g[j-k], truncated to n terms.
inline std::vector<cplx> linear_convolution_fft(const std::vector<cplx>& f,
                                                const std::vector<cplx>& g) {
  const std::size_t n = f.size();
  std::size_t len = 1;
  while (len < 2 * n - 1) len <<= 1;
  std::vector<cplx> fa(f), ga(g);
  fa.resize(len);
  ga.resize(len);
  fft(fa, false);
  fft(ga, false);
  for (std::size_t i = 0; i < len; ++i) fa[i] *= ga[i];
  fft(fa, true);
  fa.resize(n);
  return fa;
}

inline void require_conv_operands(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g, "convolve");
  if (!f.grid().starts_at_zero())
    throw grid_mismatch_error("convolve: grid must start at 0");
}

}  // namespace detail

/// Reference implementation: direct O(n^2) product-trapezoidal sums.
inline GridFunction convolve_direct(const GridFunction& f, const GridFunction& g) {
  detail::require_conv_operands(f, g);
  const int n = f.size();
  const double h = f.grid().step();
  std::vector<cplx> out(n, cplx(0.0));
  for (int j = 1; j < n; ++j) {
    cplx s = 0.5 * (f[0] * g[j] + f[j] * g[0]);
    for (int k = 1; k < j; ++k) s += f[k] * g[j - k];
    out[j] = h * s;
  }
  return GridFunction(f.grid(), std::move(out));
}

/// (f * g)(x) = int_0^x f(t) g(x-t) dt with trapezoidal product weights.
/// Uses the FFT path for larger grids; bit-identical weights either way.
inline GridFunction convolve(const GridFunction& f, const GridFunction& g) {
  detail::require_conv_operands(f, g);
  const int n = f.size();
  if (n < 192) return convolve_direct(f, g);
  const double h = f.grid().step();
  std::vector<cplx> full =
      detail::linear_convolution_fft(f.values(), g.values());
  std::vector<cplx> out(n);
  out[0] = cplx(0.0);
  for (int j = 1; j < n; ++j)
    out[j] = h * (full[j] - 0.5 * (f[0] * g[j] + f[j] * g[0]));
  return GridFunction(f.grid(), std::move(out));
}

/// n-fold convolution power, left fold: f^{*n} = (...(f*f)*f...)*f.
inline GridFunction conv_power(const GridFunction& f, int n) {
  if (n == 0)
    throw unsupported_operation_error(
        "conv_power: n = 0 is the convolution identity (Dirac delta), "
        "which is not a grid function");
  if (n < 0) throw invalid_argument_error("conv_power: negative power");
  GridFunction r = f;
  for (int i = 1; i < n; ++i) r = convolve(r, f);
  return r;
}

//------------------------------------------------------------------------
// Weighted functions: samples of (pi - t) f(t)
//------------------------------------------------------------------------

/// Samples of (pi - t) f(t) on a grid whose right end may reach pi, where the
/// weight vanishes. The node t = pi is a removable sample that carries 0.
struct WeightedGridFunction {
  GridFunction fn;  // the weighted samples themselves

  const Grid& grid() const { return fn.grid(); }
  double norm() const { return l2_norm(fn); }
};

/// Multiply by the weight (pi - t).
inline WeightedGridFunction to_weighted(const GridFunction& f) {
  const Grid& g = f.grid();
  std::vector<cplx> v(g.n);
  for (int j = 0; j < g.n; ++j) v[j] = (kPi - g.node(j)) * f[j];
  if (std::abs(g.x1 - kPi) <= 1e-12) v[g.n - 1] = cplx(0.0);
  return WeightedGridFunction{GridFunction(g, std::move(v))};
}

/// Divide by the weight. When the grid reaches t = pi the last node is
/// excluded and the result lives on the grid shortened by one node.
inline GridFunction from_weighted(const WeightedGridFunction& wf) {
  const Grid& g = wf.grid();
  const bool ends_at_pi = std::abs(g.x1 - kPi) <= 1e-12;
  const int nout = ends_at_pi ? g.n - 1 : g.n;
  if (nout < 2)
    throw invalid_argument_error("from_weighted: too few nodes left of pi");
  std::vector<cplx> v(nout);
  for (int j = 0; j < nout; ++j) v[j] = wf.fn[j] / (kPi - g.node(j));
  return GridFunction(g.subgrid(0, nout - 1), std::move(v));
}

}  // namespace dirackit
