#pragma once

// Conversion between the characteristic function and its transform pair
// (w1, w2):
//
//   Delta(lambda) = sin(lambda pi)
//                 + int_0^pi ( w1(t) sin(lambda t) + w2(t) cos(lambda t) ) dt,
//
// realized as a regularized least-squares fit of sampled Delta data, plus the
// E-function values used by the partial inverse problem.
//
// The fit parameterizes each of w1, w2 in the redundant trigonometric family
// {1, cos kt, sin kt : k <= K} on (0, pi) (a Fourier-extension style basis;
// smooth non-periodic densities need both parities), samples lambda on a
// half-integer lattice spanning twice the band, and solves the regularized
// normal equations with iterated refinement. The factorization depends only
// on the grid and the options, so it is built once and reused across kernels.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dirackit/errors.hpp"
#include "dirackit/forward.hpp"
#include "dirackit/grid.hpp"

namespace dirackit {

struct WPair {
  GridFunction w1, w2;

  WPair(GridFunction a, GridFunction b) : w1(std::move(a)), w2(std::move(b)) {
    detail::require_same_grid(w1, w2, "WPair");
  }

  const Grid& grid() const { return w1.grid(); }
  double norm() const {
    return std::sqrt(l2_norm(w1) * l2_norm(w1) + l2_norm(w2) * l2_norm(w2));
  }
};

inline WPair operator-(const WPair& a, const WPair& b) {
  return WPair(a.w1 - b.w1, a.w2 - b.w2);
}

/// d^j/dlambda^j of sin(lambda t) and cos(lambda t): t^j-weighted phase shifts.
inline cplx dsin_dlambda(cplx lambda, double t, int j) {
  return std::pow(t, j) * std::sin(lambda * t + cplx(j * kPi / 2.0));
}
inline cplx dcos_dlambda(cplx lambda, double t, int j) {
  return std::pow(t, j) * std::cos(lambda * t + cplx(j * kPi / 2.0));
}

struct ExtractionOptions {
  int band = 40;            // highest trig mode used for each of w1, w2
  double tikhonov = 1e-13;  // regularization weight
  double cond_limit = 1e16;
  // Transform pairs of kernels truncated at an interior point a carry a jump
  // at b = pi - a. A breakpoint >= 0 augments each density's family with the
  // one-sided elements (t - b)^r 1[t >= b], r < breakpoint_orders, so such
  // piecewise-smooth pairs are fit to spectral accuracy.
  double breakpoint = -1.0;
  int breakpoint_orders = 4;
};

struct ExtractionResult {
  WPair w;
  double residual = 0.0;       // ||A x - data|| over the sample set
  double data_norm = 0.0;
};

class ExtractionPlan {
 public:
  static ExtractionPlan build(const Grid& grid, const ExtractionOptions& opt = {}) {
    detail::require_full_interval(grid, "ExtractionPlan");
    if (opt.band < 1) throw invalid_argument_error("ExtractionPlan: band must be >= 1");
    ExtractionPlan plan;
    plan.grid_ = grid;
    plan.opt_ = opt;

    // Half-integer lattice covering [-(2K + 1/2), 2K + 1/2]. Twice the band:
    // the non-periodic family members leak transform content up to ~2K, and
    // sampling it keeps the fit injective (without it the smallest singular
    // values sink to ~sqrt(tikhonov) and real components get truncated).
    const int K = opt.band;
    for (int i = 0; i <= 8 * K + 2; ++i)
      plan.lambdas_.push_back(-(2 * K + 0.5) + 0.5 * i);

    plan.assemble();
    return plan;
  }

  /// Plan over a caller-supplied real sample set (spacing must be <= 1/2).
  static ExtractionPlan build_for_samples(const Grid& grid,
                                          std::vector<double> lambdas,
                                          const ExtractionOptions& opt = {}) {
    detail::require_full_interval(grid, "ExtractionPlan");
    if (lambdas.size() < 8)
      throw invalid_argument_error("ExtractionPlan: too few lambda samples");
    std::sort(lambdas.begin(), lambdas.end());
    for (std::size_t i = 1; i < lambdas.size(); ++i)
      if (lambdas[i] - lambdas[i - 1] > 0.5 + 1e-9)
        throw invalid_argument_error("ExtractionPlan: sample spacing exceeds 1/2");
    ExtractionPlan plan;
    plan.grid_ = grid;
    plan.opt_ = opt;
    const double span = std::min(-lambdas.front(), lambdas.back());
    plan.opt_.band = std::max(1, std::min(opt.band, static_cast<int>((span - 0.4) / 2)));
    plan.lambdas_ = std::move(lambdas);
    plan.assemble();
    return plan;
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  int band() const { return opt_.band; }
  double condition_estimate() const { return cond_; }

  /// Sample Delta(lambda) - sin(lambda pi) for this plan's lattice.
  std::vector<cplx> sample_data(const KernelPair& kernel) const {
    if (kernel.grid() != grid_)
      throw grid_mismatch_error("ExtractionPlan: kernel grid differs from plan grid");
    std::vector<cplx> d(lambdas_.size());
    for (std::size_t i = 0; i < lambdas_.size(); ++i) {
      const cplx lam(lambdas_[i]);
      d[i] = char_fn(kernel, lam) - std::sin(lam * kPi);
    }
    return d;
  }

  /// Regularized least-squares fit of the sampled data.
  ExtractionResult fit(const std::vector<cplx>& data) const {
    const int M = static_cast<int>(lambdas_.size());
    if (static_cast<int>(data.size()) != M)
      throw invalid_argument_error("ExtractionPlan::fit: data size mismatch");

    Eigen::VectorXd dre(M), dim(M);
    for (int i = 0; i < M; ++i) {
      dre(i) = data[i].real();
      dim(i) = data[i].imag();
    }
    // Tikhonov via the normal equations (A^T A + eps I) x = A^T d, plus two
    // rounds of iterated refinement; refinement squares the regularization
    // bias on the weakly-observed directions and reuses the factorization.
    auto solve_one = [&](const Eigen::VectorXd& d) {
      Eigen::VectorXd x = normal_.solve((A_.transpose() * d).eval());
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd r = d - A_ * x;
        x += normal_.solve((A_.transpose() * r).eval());
      }
      return x;
    };
    const Eigen::VectorXd xre = solve_one(dre);
    const Eigen::VectorXd xim = solve_one(dim);

    const Eigen::VectorXd rre = A_ * xre - dre;
    const Eigen::VectorXd rim = A_ * xim - dim;
    const double residual = std::sqrt(rre.squaredNorm() + rim.squaredNorm());
    const double dnorm = std::sqrt(dre.squaredNorm() + dim.squaredNorm());

    // sample coefficients back onto the grid
    const int nb = cols_per_density_;
    auto synth = [&](int offset) {
      std::vector<cplx> v(grid_.n, cplx(0.0));
      for (int c = 0; c < nb; ++c) {
        const cplx coef(xre(offset + c), xim(offset + c));
        if (coef == cplx(0.0)) continue;
        for (int j = 0; j < grid_.n; ++j) v[j] += coef * phi_(j, c);
      }
      return GridFunction(grid_, std::move(v));
    };
    return ExtractionResult{WPair(synth(0), synth(nb)), residual, dnorm};
  }

  /// Evaluate the transform of a fitted pair at arbitrary lambda
  /// (quadrature-consistent synthesis, for held-out checks).
  cplx synthesize(const WPair& w, cplx lambda) const {
    std::vector<cplx> v(grid_.n);
    for (int j = 0; j < grid_.n; ++j) {
      const double t = grid_.node(j);
      v[j] = w.w1[j] * std::sin(lambda * t) + w.w2[j] * std::cos(lambda * t);
    }
    return trapz(GridFunction(grid_, std::move(v)));
  }

 private:
  void assemble() {
    const int K = opt_.band;
    const int R = opt_.breakpoint >= 0.0 ? opt_.breakpoint_orders : 0;
    const int nb = 2 * K + 1 + R;
    cols_per_density_ = nb;
    const int M = static_cast<int>(lambdas_.size());
    const int n = grid_.n;
    const double h = grid_.step();

    // family samples phi_c(t): c = 0 -> 1; odd c -> cos(((c+1)/2) t);
    // even c > 0 -> sin((c/2) t); trailing R columns are the one-sided
    // breakpoint elements (t - b)^r 1[t >= b] (right-continuous at b)
    phi_ = Eigen::MatrixXd(n, nb);
    for (int j = 0; j < n; ++j) {
      const double t = grid_.node(j);
      phi_(j, 0) = 1.0;
      for (int k = 1; k <= K; ++k) {
        phi_(j, 2 * k - 1) = std::cos(k * t);
        phi_(j, 2 * k) = std::sin(k * t);
      }
      for (int r = 0; r < R; ++r) {
        const double dt = t - opt_.breakpoint;
        phi_(j, 2 * K + 1 + r) = dt >= -1e-12 ? std::pow(std::max(dt, 0.0), r) : 0.0;
      }
    }

    A_ = Eigen::MatrixXd(M, 2 * nb);
    for (int i = 0; i < M; ++i) {
      const double lam = lambdas_[i];
      for (int c = 0; c < nb; ++c) {
        double accs = 0.0, accc = 0.0;
        for (int j = 0; j < n; ++j) {
          const double tau = (j == 0 || j == n - 1) ? 0.5 : 1.0;
          const double t = grid_.node(j);
          accs += tau * phi_(j, c) * std::sin(lam * t);
          accc += tau * phi_(j, c) * std::cos(lam * t);
        }
        A_(i, c) = h * accs;
        A_(i, nb + c) = h * accc;
      }
    }

    Eigen::MatrixXd G = A_.transpose() * A_;
    G.diagonal().array() += opt_.tikhonov;
    normal_.compute(G);
    if (normal_.info() != Eigen::Success)
      throw conditioning_error("ExtractionPlan: normal matrix factorization failed", 0.0);
    const auto& dvec = normal_.vectorD();
    const double dmax = dvec.maxCoeff();
    const double dmin = dvec.minCoeff();
    cond_ = dmin > 0 ? dmax / dmin : 1e300;
    if (cond_ > opt_.cond_limit || dmin <= 0)
      throw conditioning_error("ExtractionPlan: normal system too ill-conditioned",
                               cond_);
  }

  Grid grid_;
  ExtractionOptions opt_;
  std::vector<double> lambdas_;
  Eigen::MatrixXd A_;    // M x 2(2K+1) quadrature-discretized synthesis
  Eigen::MatrixXd phi_;  // n x (2K+1) family samples
  Eigen::LDLT<Eigen::MatrixXd> normal_;
  int cols_per_density_ = 0;
  double cond_ = 0.0;
};

/// Fit (w1, w2) on (0, pi) from Delta samples of the kernel's problem at the
/// given real lambda samples (must span the band densely; spacing <= 1/2).
inline ExtractionResult extract_w(const KernelPair& kernel,
                                  const std::vector<double>& lambda_samples,
                                  const ExtractionOptions& opt = {}) {
  auto plan = ExtractionPlan::build_for_samples(kernel.grid(), lambda_samples, opt);
  return plan.fit(plan.sample_data(kernel));
}

/// Convenience: extraction on the plan's own half-integer lattice.
inline ExtractionResult extract_w(const KernelPair& kernel,
                                  const ExtractionPlan& plan) {
  return plan.fit(plan.sample_data(kernel));
}

//------------------------------------------------------------------------
// E-function values
//------------------------------------------------------------------------

struct EValueEntry {
  cplx lambda{0.0};
  std::vector<cplx> derivatives;  // orders j = 0 .. m_k - 1
};

struct EValues {
  std::vector<EValueEntry> entries;

  int total_count() const {
    int c = 0;
    for (const auto& e : entries) c += static_cast<int>(e.derivatives.size());
    return c;
  }
};

/// Right-hand side route: at an eigenvalue lambda_k of the target problem,
///   d^j E(lambda_k) = -d^j sin(lambda pi) - d^j int_b^pi (w1 sin + w2 cos) dt,
/// using analytic lambda-derivatives and the trapezoid rule over (b, pi).
inline cplx E_target(cplx lambda_k, int j, const WPair& w_tail) {
  const Grid& g = w_tail.grid();
  std::vector<cplx> v(g.n);
  for (int i = 0; i < g.n; ++i) {
    const double t = g.node(i);
    v[i] = w_tail.w1[i] * dsin_dlambda(lambda_k, t, j) +
           w_tail.w2[i] * dcos_dlambda(lambda_k, t, j);
  }
  const cplx tail_int = trapz(GridFunction(g, std::move(v)));
  return -std::pow(kPi, j) * std::sin(lambda_k * kPi + cplx(j * kPi / 2.0)) - tail_int;
}

/// Moment route: the bilinear pairing of a head pair on (0, b) against the
/// derivative trigonometric vector (no conjugation).
inline cplx E_moment(cplx lambda_k, int j, const WPair& w_head) {
  const Grid& g = w_head.grid();
  std::vector<cplx> v(g.n);
  for (int i = 0; i < g.n; ++i) {
    const double t = g.node(i);
    v[i] = w_head.w1[i] * dsin_dlambda(lambda_k, t, j) +
           w_head.w2[i] * dcos_dlambda(lambda_k, t, j);
  }
  return trapz(GridFunction(g, std::move(v)));
}

}  // namespace dirackit
