#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "dirackit/grid.hpp"

using namespace dirackit;

namespace {

GridFunction random_fn(const Grid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v(g.n);
  for (auto& z : v) z = cplx(u(rng), u(rng));
  return GridFunction(g, std::move(v));
}

double rel_diff(const GridFunction& f, const GridFunction& g) {
  const double d = l2_norm(f - g);
  const double s = std::max(l2_norm(f), l2_norm(g));
  return s > 0 ? d / s : d;
}

}  // namespace

TEST_CASE("grid construction and invariants") {
  Grid g(0.0, kPi, 257);
  CHECK(g.step() == Catch::Approx(kPi / 256));
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(256) == kPi);
  CHECK(g.index_of(g.node(100)) == 100);

  CHECK_THROWS_AS(Grid(0.0, kPi, 1), invalid_argument_error);
  CHECK_THROWS_AS(Grid(-0.5, kPi, 16), invalid_argument_error);
  CHECK_THROWS_AS(Grid(0.0, 2 * kPi, 16), invalid_argument_error);
  CHECK_THROWS_AS(g.index_of(g.node(10) + 0.3 * g.step()), grid_mismatch_error);
}

TEST_CASE("aligned grid sizes for interval splits") {
  CHECK(aligned_grid_size(513, 2) == 513);
  CHECK(aligned_grid_size(513, 4) == 513);
  CHECK(aligned_grid_size(513, 3) == 514);  // 513 panels, divisible by 3
  const int n = aligned_grid_size(513, 3);
  Grid g(0.0, kPi, n);
  const double a = kPi - kPi / 3;
  CHECK(g.index_of(a) == 2 * (n - 1) / 3);
}

TEST_CASE("convolution: zero annihilates") {
  Grid g(0.0, kPi, 64);
  auto z = GridFunction::zeros(g);
  auto f = random_fn(g, 7);
  auto c = convolve(f, z);
  for (int j = 0; j < g.n; ++j) CHECK(std::abs(c[j]) == 0.0);
}

TEST_CASE("convolution: ones give x exactly") {
  Grid g(0.0, kPi, 129);
  auto one = GridFunction::constant(g, 1.0);
  auto c = convolve(one, one);
  for (int j = 0; j < g.n; ++j)
    CHECK(std::abs(c[j] - g.node(j)) < 1e-13);
}

TEST_CASE("convolution: fast path matches direct oracle") {
  Grid g(0.0, kPi, 257);  // above the FFT threshold
  auto f = random_fn(g, 11);
  auto gfn = random_fn(g, 13);
  auto fast = convolve(f, gfn);
  auto slow = convolve_direct(f, gfn);
  CHECK(rel_diff(fast, slow) < 1e-12);
}

TEST_CASE("convolution: commutative and bilinear") {
  Grid g(0.0, kPi, 64);
  auto f = random_fn(g, 3);
  auto gfn = random_fn(g, 4);
  auto h = random_fn(g, 5);

  CHECK(rel_diff(convolve(f, gfn), convolve(gfn, f)) < 1e-14);

  const cplx a(0.7, -0.2);
  auto lhs = convolve(a * f + h, gfn);
  auto rhs = a * convolve(f, gfn) + convolve(h, gfn);
  CHECK(rel_diff(lhs, rhs) < 1e-13);

  CHECK_THROWS_AS(convolve(f, random_fn(Grid(0.0, kPi, 65), 6)),
                  grid_mismatch_error);
  Grid off(0.5, kPi, 64);
  CHECK_THROWS_AS(convolve(random_fn(off, 1), random_fn(off, 2)),
                  grid_mismatch_error);
}

TEST_CASE("convolution: associativity on the causal algebra") {
  // With the result(0) = 0 convention the product-trapezoidal algebra is
  // exactly associative on inputs vanishing at the origin (every convolution
  // output is in that class, so iterated products compose consistently).
  Grid g(0.0, kPi, 256);
  auto f = random_fn(g, 21);
  auto gfn = random_fn(g, 22);
  auto h = random_fn(g, 23);
  f[0] = gfn[0] = h[0] = cplx(0.0);
  auto lhs = convolve(convolve(f, gfn), h);
  auto rhs = convolve(f, convolve(gfn, h));
  CHECK(rel_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("convolution norm bound ||f*g|| <= pi ||f|| ||g||") {
  Grid g(0.0, kPi, 128);
  for (unsigned seed = 1; seed <= 8; ++seed) {
    auto f = random_fn(g, seed);
    auto gfn = random_fn(g, seed + 100);
    CHECK(l2_norm(convolve(f, gfn)) <= kPi * l2_norm(f) * l2_norm(gfn) + 1e-12);
  }
}

TEST_CASE("conv_power: closed forms and norm estimate") {
  Grid g(0.0, kPi, 129);
  auto one = GridFunction::constant(g, 1.0);

  auto p2 = conv_power(one, 2);
  auto p3 = conv_power(one, 3);
  for (int j = 0; j < g.n; ++j) {
    const double x = g.node(j);
    CHECK(std::abs(p2[j] - x) < 1e-12);
    CHECK(std::abs(p3[j] - 0.5 * x * x) < 1e-11);
  }

  // recursion identity holds exactly (left fold)
  auto f = random_fn(g, 17);
  auto p4 = conv_power(f, 4);
  auto p4b = convolve(conv_power(f, 3), f);
  CHECK(rel_diff(p4, p4b) == 0.0);

  // ||f^{*n}|| <= pi^{n-1} ||f||^n
  for (int n = 1; n <= 5; ++n) {
    const double lhs = l2_norm(conv_power(f, n));
    const double rhs = std::pow(kPi, n - 1) * std::pow(l2_norm(f), n);
    CHECK(lhs <= rhs * (1 + 1e-10));
  }

  CHECK_THROWS_AS(conv_power(f, 0), unsupported_operation_error);
}

TEST_CASE("l2 norm, restrict, reflect") {
  Grid g(0.0, kPi, 257);
  CHECK(l2_norm(GridFunction::zeros(g)) == 0.0);

  // restrict of a constant to an aligned subgrid is the constant
  auto c = GridFunction::constant(g, cplx(2.0, -1.0));
  Grid sub = g.subgrid(64, 192);
  auto r = restrict_to(c, sub);
  for (int j = 0; j < sub.n; ++j) CHECK(r[j] == cplx(2.0, -1.0));

  // non-aligned subgrid rejected
  Grid bad(0.1, 1.0, 33);
  CHECK_THROWS_AS(restrict_to(c, bad), grid_mismatch_error);

  // reflect is an involution on the symmetric full grid
  auto f = random_fn(g, 9);
  auto ff = reflect(reflect(f));
  CHECK(rel_diff(f, ff) == 0.0);
  // and maps subintervals correctly: (0,b) -> (a,pi)
  Grid head = g.subgrid(0, 64);
  auto hf = restrict_to(f, head);
  auto rf = reflect(hf);
  CHECK(rf.grid().x0 == Catch::Approx(kPi - head.x1));
  CHECK(std::abs(rf[0] - hf[64]) == 0.0);
}

TEST_CASE("weighted functions: round trip away from pi, zero at pi") {
  Grid g(kPi / 2, kPi, 65);
  std::vector<cplx> v(g.n);
  for (int j = 0; j < g.n; ++j) v[j] = cplx(std::sin(g.node(j)), 0.3);
  GridFunction f(g, v);

  auto w = to_weighted(f);
  CHECK(w.fn[g.n - 1] == cplx(0.0));
  auto back = from_weighted(w);
  CHECK(back.grid().n == g.n - 1);
  for (int j = 0; j < back.grid().n; ++j)
    CHECK(std::abs(back[j] - f[j]) < 1e-13);
}

TEST_CASE("non-finite values are rejected") {
  Grid g(0.0, 1.0, 8);
  std::vector<cplx> v(g.n, cplx(1.0));
  v[3] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(GridFunction(g, v), numeric_range_error);
}
