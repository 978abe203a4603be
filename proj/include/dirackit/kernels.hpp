#pragma once

// Analytic kernel families used by the CLI and the test corpus:
// trigonometric polynomials, Gaussian bumps and piecewise-linear profiles.
// All generation is deterministic in the seed.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dirackit/forward.hpp"
#include "dirackit/grid.hpp"

namespace dirackit {

struct KernelFamilyOptions {
  std::string family = "trig";  // zero | trig | gauss | pwlinear
  double amplitude = 0.2;       // target L2 norm of each of p, q
  int terms = 3;                // trig modes / bumps / breakpoints
  bool complex_valued = true;
  std::uint64_t seed = 1;
};

namespace detail {

inline GridFunction normalized_to(GridFunction f, double target) {
  const double nrm = l2_norm(f);
  if (nrm == 0.0) return f;
  return cplx(target / nrm) * f;
}

template <typename Rng>
cplx random_coeff(Rng& rng, bool complex_valued) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double re = u(rng);
  const double im = complex_valued ? 0.4 * u(rng) : 0.0;
  return cplx(re, im);
}

template <typename Rng>
GridFunction random_trig(const Grid& g, Rng& rng, int terms, bool cx, double amp) {
  std::vector<cplx> coef_c(terms + 1), coef_s(terms + 1);
  for (int l = 0; l <= terms; ++l) {
    const double decay = 1.0 / (1.0 + l * l);
    coef_c[l] = decay * random_coeff(rng, cx);
    coef_s[l] = decay * random_coeff(rng, cx);
  }
  auto f = GridFunction::sample(g, [&](double t) {
    cplx v = 0.0;
    for (int l = 0; l <= terms; ++l)
      v += coef_c[l] * std::cos(l * t) + coef_s[l] * std::sin(l * t);
    return v;
  });
  return normalized_to(std::move(f), amp);
}

template <typename Rng>
GridFunction random_gauss(const Grid& g, Rng& rng, int bumps, bool cx, double amp) {
  std::uniform_real_distribution<double> uc(0.15 * kPi, 0.85 * kPi);
  std::uniform_real_distribution<double> us(0.25, 0.6);
  std::vector<double> center(bumps), width(bumps);
  std::vector<cplx> height(bumps);
  for (int i = 0; i < bumps; ++i) {
    center[i] = uc(rng);
    width[i] = us(rng);
    height[i] = random_coeff(rng, cx);
  }
  auto f = GridFunction::sample(g, [&](double t) {
    cplx v = 0.0;
    for (int i = 0; i < bumps; ++i) {
      const double z = (t - center[i]) / width[i];
      v += height[i] * std::exp(-0.5 * z * z);
    }
    return v;
  });
  return normalized_to(std::move(f), amp);
}

template <typename Rng>
GridFunction random_pwlinear(const Grid& g, Rng& rng, int breaks, bool cx, double amp) {
  const int m = std::max(2, breaks);
  std::vector<cplx> knots(m + 1);
  for (auto& k : knots) k = random_coeff(rng, cx);
  auto f = GridFunction::sample(g, [&](double t) {
    const double s = t / kPi * m;
    const int i = std::min(m - 1, static_cast<int>(s));
    const double w = s - i;
    return (1.0 - w) * knots[i] + w * knots[i + 1];
  });
  return normalized_to(std::move(f), amp);
}

}  // namespace detail

inline KernelPair make_kernel(const Grid& g, const KernelFamilyOptions& opt) {
  if (opt.family == "zero")
    return KernelPair(GridFunction::zeros(g), GridFunction::zeros(g));
  std::mt19937_64 rng(opt.seed);
  auto draw = [&]() -> GridFunction {
    if (opt.family == "trig")
      return detail::random_trig(g, rng, opt.terms, opt.complex_valued, opt.amplitude);
    if (opt.family == "gauss")
      return detail::random_gauss(g, rng, opt.terms, opt.complex_valued, opt.amplitude);
    if (opt.family == "pwlinear")
      return detail::random_pwlinear(g, rng, opt.terms, opt.complex_valued, opt.amplitude);
    throw invalid_argument_error("make_kernel: unknown family '" + opt.family + "'");
  };
  GridFunction p = draw();
  GridFunction q = draw();
  return KernelPair(std::move(p), std::move(q));
}

/// Deterministic corpus of smooth kernels for cross-validation tests.
inline std::vector<KernelPair> smooth_corpus(const Grid& g, int count,
                                             double amplitude, std::uint64_t seed0) {
  std::vector<KernelPair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    KernelFamilyOptions opt;
    opt.family = (i % 2 == 0) ? "trig" : "gauss";
    opt.amplitude = amplitude;
    opt.terms = 2 + i % 3;
    opt.seed = seed0 + 97 * static_cast<std::uint64_t>(i);
    out.push_back(make_kernel(g, opt));
  }
  return out;
}

}  // namespace dirackit
