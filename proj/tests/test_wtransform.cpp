#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "dirackit/kernels.hpp"
#include "dirackit/wtransform.hpp"

using namespace dirackit;

namespace {

double rel_l2(const WPair& a, const WPair& b) {
  const double d = (a - b).norm();
  const double s = std::max(a.norm(), b.norm());
  return s > 0 ? d / s : d;
}

}  // namespace

TEST_CASE("extraction: zero kernel gives the zero pair") {
  Grid g(0.0, kPi, 257);
  KernelPair k(GridFunction::zeros(g), GridFunction::zeros(g));
  auto plan = ExtractionPlan::build(g, {.band = 20});
  auto r = extract_w(k, plan);
  CHECK(r.residual < 1e-8);
  CHECK(r.w.norm() < 1e-8);
}

TEST_CASE("extraction: manufactured transform pair is recovered") {
  Grid g(0.0, kPi, 257);
  auto plan = ExtractionPlan::build(g, {.band = 24});

  // smooth pair inside the representable family
  auto w1 = GridFunction::sample(g, [](double t) {
    return cplx(0.3 * std::sin(2 * t) - 0.1 * std::cos(5 * t), 0.2 * std::sin(t));
  });
  auto w2 = GridFunction::sample(g, [](double t) {
    return cplx(0.15 + 0.2 * std::cos(3 * t), -0.1 * std::sin(4 * t));
  });
  WPair truth(w1, w2);

  // manufacture Delta - sin by the same quadrature the fit uses
  std::vector<cplx> data(plan.lambdas().size());
  for (std::size_t i = 0; i < plan.lambdas().size(); ++i)
    data[i] = plan.synthesize(truth, cplx(plan.lambdas()[i]));

  auto r = plan.fit(data);
  CHECK(rel_l2(r.w, truth) < 1e-6);
  CHECK(r.residual < 1e-7 * std::max(1.0, r.data_norm));
}

TEST_CASE("extraction: held-out consistency for a random small kernel") {
  Grid g(0.0, kPi, 257);
  auto k = make_kernel(g, {.family = "trig", .amplitude = 0.2, .terms = 3,
                           .complex_valued = true, .seed = 77});
  auto plan = ExtractionPlan::build(g, {.band = 24});
  auto r = extract_w(k, plan);

  // re-synthesize Delta from the extracted pair at held-out lambda points
  double worst = 0.0;
  for (double lam : {0.26, 1.74, 3.9, 7.3, -5.15, -11.6}) {
    const cplx want = char_fn(k, cplx(lam)) - std::sin(cplx(lam) * kPi);
    const cplx got = plan.synthesize(r.w, cplx(lam));
    worst = std::max(worst, std::abs(want - got));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("extraction is linear in the Delta data") {
  Grid g(0.0, kPi, 129);
  auto plan = ExtractionPlan::build(g, {.band = 12});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<cplx> d1(plan.lambdas().size()), d2(d1.size()), dsum(d1.size());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    d1[i] = cplx(u(rng), u(rng));
    d2[i] = cplx(u(rng), u(rng));
    dsum[i] = d1[i] + d2[i];
  }
  auto r1 = plan.fit(d1);
  auto r2 = plan.fit(d2);
  auto rs = plan.fit(dsum);
  WPair manual(r1.w.w1 + r2.w.w1, r1.w.w2 + r2.w.w2);
  // exact linearity up to rounding amplified by the dual system's condition
  CHECK(rel_l2(rs.w, manual) < 5e-6);
}

TEST_CASE("extraction: zeros of the re-synthesized transform match eigenvalues") {
  Grid g(0.0, kPi, 257);
  auto k = make_kernel(g, {.family = "gauss", .amplitude = 0.25, .terms = 2,
                           .complex_valued = true, .seed = 12});
  auto plan = ExtractionPlan::build(g, {.band = 20});
  auto r = extract_w(k, plan);
  ForwardOptions fopt;
  fopt.verify_boxes = false;
  auto sp = eigenvalues(k, 6, fopt);
  for (const auto& e : sp.entries) {
    const cplx val = std::sin(e.lambda * kPi) + plan.synthesize(r.w, e.lambda);
    CHECK(std::abs(val) < 1e-4);
  }
}

TEST_CASE("sample spacing above 1/2 is rejected") {
  Grid g(0.0, kPi, 129);
  std::vector<double> sparse;
  for (int i = -10; i <= 10; ++i) sparse.push_back(0.8 * i);
  KernelPair k(GridFunction::zeros(g), GridFunction::zeros(g));
  CHECK_THROWS_AS(extract_w(k, sparse), invalid_argument_error);
}

TEST_CASE("E_target: free-tail closed forms") {
  Grid tail(kPi / 2, kPi, 4097);  // fine grid so the quadrature is negligible
  WPair zero(GridFunction::zeros(tail), GridFunction::zeros(tail));

  for (int kk : {-3, 0, 2, 7}) {
    CHECK(std::abs(E_target(cplx(static_cast<double>(kk)), 0, zero)) < 1e-12);
    const cplx want = -kPi * std::pow(-1.0, kk);
    CHECK(std::abs(E_target(cplx(static_cast<double>(kk)), 1, zero) - want) < 1e-12);
  }
}

TEST_CASE("E_target: constant w2 tail against the analytic integral") {
  const double b = kPi / 2;
  Grid tail(b, kPi, 16385);
  WPair w(GridFunction::zeros(tail), GridFunction::constant(tail, 1.0));
  for (double lam : {0.7, 1.3, 2.0}) {
    const cplx want = -std::sin(lam * kPi) - (std::sin(lam * kPi) - std::sin(lam * b)) / lam;
    CHECK(std::abs(E_target(cplx(lam), 0, w) - want) < 1e-8);
  }
}

TEST_CASE("E_moment: closed form and zero head") {
  const double b = kPi / 2;
  Grid head(0.0, b, 16385);
  WPair zero(GridFunction::zeros(head), GridFunction::zeros(head));
  CHECK(std::abs(E_moment(cplx(1.3), 0, zero)) == 0.0);
  CHECK(std::abs(E_moment(cplx(0.4), 2, zero)) == 0.0);

  WPair w(GridFunction::constant(head, 1.0), GridFunction::zeros(head));
  for (double lam : {0.9, 2.2, 5.0}) {
    const cplx want = (1.0 - std::cos(lam * b)) / lam;
    CHECK(std::abs(E_moment(cplx(lam), 0, w) - want) < 1e-8);
  }
}

TEST_CASE("E_target and E_moment agree on a consistent pipeline state") {
  // Both routes to the E-values must coincide: the defining route through
  // -sin and the tail integral at eigenvalues, and the moment route through
  // the head pair of the same problem.
  const int m = 2, S = 8;
  Grid g(0.0, kPi, 257);
  auto truth = make_kernel(g, {.family = "trig", .amplitude = 0.25, .terms = 3,
                               .complex_valued = true, .seed = 11});
  const double b = kPi / m;
  auto plan = ExtractionPlan::build(
      g, {.band = 40, .tikhonov = 1e-13, .breakpoint = b});
  auto ex = plan.fit(plan.sample_data(truth));
  const int ib = g.index_of(b);
  WPair tail(restrict_to(ex.w.w1, g.subgrid(ib, g.n - 1)),
             restrict_to(ex.w.w2, g.subgrid(ib, g.n - 1)));
  WPair head(restrict_to(ex.w.w1, g.subgrid(0, ib)),
             restrict_to(ex.w.w2, g.subgrid(0, ib)));

  std::vector<int> idx;
  for (int s = -S; s <= S; ++s) idx.push_back(s * m);
  auto sp = eigenvalues_at_indices(truth, idx);

  double worst = 0.0;
  for (const auto& e : sp.entries)
    worst = std::max(worst,
                     std::abs(E_target(e.lambda, 0, tail) - E_moment(e.lambda, 0, head)));
  CHECK(worst < 1e-5);
}

TEST_CASE("derivative trig vectors: analytic identities") {
  // d/dl sin(lt) = t cos(lt), d2/dl2 sin(lt) = -t^2 sin(lt), complex l
  const cplx lam(1.3, 0.4);
  for (double t : {0.3, 1.0, 2.5}) {
    CHECK(std::abs(dsin_dlambda(lam, t, 1) - t * std::cos(lam * t)) < 1e-14);
    CHECK(std::abs(dsin_dlambda(lam, t, 2) + t * t * std::sin(lam * t)) < 1e-13);
    CHECK(std::abs(dcos_dlambda(lam, t, 1) + t * std::sin(lam * t)) < 1e-14);
  }
}
