#pragma once

// The vector-function system built on a subspectrum,
//
//   S_I = { ( d^j/dlambda^j sin(lambda t), d^j/dlambda^j cos(lambda t) )
//           at lambda = lambda_k }_{k in J, j < m_k},
//
// on (0, b): Gram matrix and completeness diagnostics, and the reconstruction
// of (w1, w2) on (0, b) from E-values through the bilinear pairing (no
// conjugation).

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "dirackit/errors.hpp"
#include "dirackit/forward.hpp"
#include "dirackit/grid.hpp"
#include "dirackit/wtransform.hpp"

namespace dirackit {

//------------------------------------------------------------------------
// Subspectrum
//------------------------------------------------------------------------

struct SubspectrumEntry {
  int first_index = 0;   // smallest spectral index mapped to this value
  cplx lambda{0.0};
  int multiplicity = 1;
};

struct Subspectrum {
  std::vector<int> indices;               // the index set I, ascending
  std::vector<SubspectrumEntry> distinct; // the set J with multiplicities M

  int total_count() const {
    int c = 0;
    for (const auto& e : distinct) c += e.multiplicity;
    return c;
  }

  /// Merge raw (index, value) pairs into distinct values with multiplicities.
  static Subspectrum from_values(std::vector<std::pair<int, cplx>> vals,
                                 double merge_tol = 1e-6) {
    if (vals.empty()) throw invalid_argument_error("Subspectrum: empty window");
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Subspectrum s;
    for (const auto& [k, lam] : vals) {
      s.indices.push_back(k);
      bool merged = false;
      for (auto& e : s.distinct) {
        if (std::abs(e.lambda - lam) <= merge_tol) {
          e.lambda = (e.lambda * static_cast<double>(e.multiplicity) + lam) /
                     static_cast<double>(e.multiplicity + 1);
          ++e.multiplicity;
          merged = true;
          break;
        }
      }
      if (!merged) s.distinct.push_back(SubspectrumEntry{k, lam, 1});
    }
    return s;
  }

  /// The arithmetic-progression subset I = { s m : |s| <= S } of a spectrum.
  static Subspectrum progression(const Spectrum& sp, int m, int S,
                                 double merge_tol = 1e-6) {
    if (m < 1 || S < 0) throw invalid_argument_error("Subspectrum: bad progression");
    std::vector<std::pair<int, cplx>> vals;
    for (int s = -S; s <= S; ++s) {
      const int k = s * m;
      const SpectrumEntry* e = nullptr;
      // multiplicity-merged spectra may hold k inside an entry's index span
      for (const auto& cand : sp.entries)
        if (cand.k <= k && k < cand.k + cand.multiplicity) {
          e = &cand;
          break;
        }
      if (!e) {
        std::ostringstream os;
        os << "Subspectrum: index " << k << " missing from the spectrum window";
        throw invalid_argument_error(os.str());
      }
      vals.emplace_back(k, e->lambda);
    }
    return from_values(std::move(vals), merge_tol);
  }
};

//------------------------------------------------------------------------
// BasisSystem
//------------------------------------------------------------------------

struct BasisVector {
  cplx lambda{0.0};
  int order = 0;  // j, the lambda-derivative order
  GridFunction f1, f2;
};

struct BasisSystem {
  double b = 0.0;
  Grid grid;
  std::vector<BasisVector> vectors;  // k ascending, then j ascending

  int count() const { return static_cast<int>(vectors.size()); }
};

/// Realize S_I on a (0, b) grid with the analytic derivative formulas.
inline BasisSystem build_basis(const Subspectrum& sub, const Grid& grid) {
  if (sub.distinct.empty()) throw invalid_argument_error("build_basis: empty window");
  if (!grid.starts_at_zero())
    throw invalid_argument_error("build_basis: grid must start at 0");
  BasisSystem basis;
  basis.b = grid.x1;
  basis.grid = grid;
  for (const auto& e : sub.distinct) {
    for (int j = 0; j < e.multiplicity; ++j) {
      auto f1 = GridFunction::sample(grid, [&](double t) {
        return dsin_dlambda(e.lambda, t, j);
      });
      auto f2 = GridFunction::sample(grid, [&](double t) {
        return dcos_dlambda(e.lambda, t, j);
      });
      basis.vectors.push_back(BasisVector{e.lambda, j, std::move(f1), std::move(f2)});
    }
  }
  return basis;
}

//------------------------------------------------------------------------
// Gram matrix and completeness
//------------------------------------------------------------------------

/// Gram matrix under the sesquilinear product (g, h) = int (conj(g1) h1 +
/// conj(g2) h2) dt, trapezoidal.
inline Eigen::MatrixXcd gram(const BasisSystem& basis) {
  const int T = basis.count();
  const Grid& g = basis.grid;
  Eigen::MatrixXcd G(T, T);
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < T; ++c) {
      cplx s = 0.0;
      for (int j = 0; j < g.n; ++j) {
        const double tau = (j == 0 || j == g.n - 1) ? 0.5 : 1.0;
        s += tau * (std::conj(basis.vectors[r].f1[j]) * basis.vectors[c].f1[j] +
                    std::conj(basis.vectors[r].f2[j]) * basis.vectors[c].f2[j]);
      }
      G(r, c) = s * g.step();
    }
  }
  return G;
}

/// Condition estimate of the (Hermitian PSD) Gram matrix.
inline double gram_condition(const Eigen::MatrixXcd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff(), hi = ev.maxCoeff();
  return lo > 0 ? hi / lo : 1e300;
}

/// Smallest singular value of the quadrature-weighted synthesis matrix whose
/// columns are the stacked basis vectors. Near zero flags a (numerically)
/// incomplete truncated system; the unperturbed m-progression gives sqrt(b).
inline double completeness_score(const BasisSystem& basis) {
  const int T = basis.count();
  const Grid& g = basis.grid;
  Eigen::MatrixXcd S(2 * g.n, T);
  for (int c = 0; c < T; ++c) {
    for (int j = 0; j < g.n; ++j) {
      const double tau = (j == 0 || j == g.n - 1) ? 0.5 : 1.0;
      const double wq = std::sqrt(tau * g.step());
      S(j, c) = wq * basis.vectors[c].f1[j];
      S(g.n + j, c) = wq * basis.vectors[c].f2[j];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(S);
  return svd.singularValues().minCoeff();
}

//------------------------------------------------------------------------
// Reconstruction of the head pair from E-values
//------------------------------------------------------------------------

struct ReconstructOptions {
  double tikhonov = 1e-10;
  double completeness_min_rel = 0.05;  // threshold on score / sqrt(b)
  double residual_rel_limit = 1e-6;    // moment residual vs ||E||
  double residual_abs_limit = 1e-8;
  // Heads with nonzero endpoint values have 1/s moment tails, so a truncated
  // window reconstructs them at O(S^{-1/2}) only. Polynomial correctors
  // t^d, d = 1..poly_correctors, per density absorb that endpoint content;
  // smoothness-weighted regularization decides the split. Zero keeps the
  // plain in-span reconstruction.
  int poly_correctors = 0;
};

struct ReconstructResult {
  WPair w;                    // on the (0, b) grid
  double residual = 0.0;      // || moment matrix * coeffs - E ||
  double score = 0.0;         // completeness score of the basis
  Eigen::VectorXcd coefficients;
};

/// Optional pointwise conditions appended to the moment system. Transform
/// pairs generated by a kernel vanish at t = 0, and continuity at b ties the
/// head to the (known) tail values; synthetic in-span data need not satisfy
/// either, so they are opt-in.
struct EndpointConditions {
  std::optional<cplx> w1_at_0, w2_at_0;
  std::optional<cplx> w1_at_b, w2_at_b;
};

/// Solve for the pair in span(S_I) whose bilinear pairings against the basis
/// vectors reproduce the E-values; Tikhonov-regularized least squares by QR.
inline ReconstructResult reconstruct_w_head(const BasisSystem& basis, const EValues& e,
                                            const ReconstructOptions& opt = {},
                                            const EndpointConditions* endpoints = nullptr) {
  const int T = basis.count();
  if (e.total_count() != T)
    throw invalid_argument_error(
        "reconstruct_w_head: E-value count differs from basis vector count");

  const double score = completeness_score(basis);
  if (score < opt.completeness_min_rel * std::sqrt(basis.b))
    throw conditioning_error("reconstruct_w_head: truncated system flagged incomplete",
                             score);

  // flatten E-values in basis order, checking the labels line up
  Eigen::VectorXcd rhs(T);
  {
    int pos = 0;
    for (const auto& entry : e.entries) {
      for (std::size_t j = 0; j < entry.derivatives.size(); ++j) {
        if (pos >= T) throw invalid_argument_error("reconstruct_w_head: excess E-values");
        const auto& v = basis.vectors[pos];
        if (std::abs(v.lambda - entry.lambda) > 1e-9 * (1.0 + std::abs(v.lambda)) ||
            v.order != static_cast<int>(j))
          throw invalid_argument_error(
              "reconstruct_w_head: E-value labels do not match the basis ordering");
        rhs(pos++) = entry.derivatives[j];
      }
    }
  }

  const Grid& g = basis.grid;
  const int P = std::max(0, opt.poly_correctors);
  const int cols = T + 2 * P;

  // corrector pair samples: (t/b)^d in one density, zero in the other
  std::vector<std::vector<cplx>> corr1(2 * P), corr2(2 * P);
  for (int d = 1; d <= P; ++d) {
    std::vector<cplx> poly(g.n);
    for (int j = 0; j < g.n; ++j) poly[j] = std::pow(g.node(j) / basis.b, d);
    corr1[d - 1] = poly;                       // acts in w1
    corr2[d - 1].assign(g.n, cplx(0.0));
    corr1[P + d - 1].assign(g.n, cplx(0.0));   // acts in w2
    corr2[P + d - 1] = poly;
  }

  // moment matrix: row r pairs candidate column c against basis vector r,
  // bilinear (no conjugation)
  auto pair_against = [&](const cplx* f1, const cplx* f2, int r) {
    cplx s = 0.0;
    for (int j = 0; j < g.n; ++j) {
      const double tau = (j == 0 || j == g.n - 1) ? 0.5 : 1.0;
      s += tau * (f1[j] * basis.vectors[r].f1[j] + f2[j] * basis.vectors[r].f2[j]);
    }
    return s * g.step();
  };

  // pointwise condition rows appended below the moment rows
  std::vector<std::pair<Eigen::RowVectorXcd, cplx>> conditions;
  if (endpoints) {
    auto add_condition = [&](int density, int node, const std::optional<cplx>& value) {
      if (!value) return;
      Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(cols);
      for (int c = 0; c < T; ++c)
        row(c) = density == 0 ? basis.vectors[c].f1[node] : basis.vectors[c].f2[node];
      for (int c = 0; c < 2 * P; ++c)
        row(T + c) = density == 0 ? corr1[c][node] : corr2[c][node];
      conditions.emplace_back(std::move(row), *value);
    };
    add_condition(0, 0, endpoints->w1_at_0);
    add_condition(1, 0, endpoints->w2_at_0);
    add_condition(0, g.n - 1, endpoints->w1_at_b);
    add_condition(1, g.n - 1, endpoints->w2_at_b);
  }
  const int C = static_cast<int>(conditions.size());

  Eigen::MatrixXcd Mom(T + C, cols);
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < T; ++c)
      Mom(r, c) = pair_against(basis.vectors[c].f1.values().data(),
                               basis.vectors[c].f2.values().data(), r);
    for (int c = 0; c < 2 * P; ++c)
      Mom(r, T + c) = pair_against(corr1[c].data(), corr2[c].data(), r);
  }
  Eigen::VectorXcd rhs_full(T + C);
  rhs_full.head(T) = rhs;
  for (int r = 0; r < C; ++r) {
    Mom.row(T + r) = conditions[r].first;
    rhs_full(T + r) = conditions[r].second;
  }

  // stacked Tikhonov least squares with smoothness-weighted column penalties:
  // high-frequency span coefficients are penalized harder than correctors, so
  // endpoint-driven 1/s tails are absorbed by the polynomial columns.
  const double se = std::sqrt(opt.tikhonov);
  Eigen::VectorXd reg(cols);
  for (int c = 0; c < T; ++c)
    reg(c) = se * (1.0 + std::abs(basis.vectors[c].lambda.real()));
  for (int c = 0; c < 2 * P; ++c) reg(T + c) = se;

  Eigen::MatrixXcd Aug = Eigen::MatrixXcd::Zero(T + C + cols, cols);
  Aug.topRows(T + C) = Mom;
  for (int c = 0; c < cols; ++c) Aug(T + C + c, c) = reg(c);
  Eigen::VectorXcd baug = Eigen::VectorXcd::Zero(T + C + cols);
  baug.head(T + C) = rhs_full;
  const Eigen::VectorXcd c = Aug.colPivHouseholderQr().solve(baug);

  const double residual = (Mom.topRows(T) * c - rhs).norm();
  const double elim = std::max(opt.residual_abs_limit,
                               opt.residual_rel_limit * rhs.norm());
  if (residual > elim)
    throw inconsistent_data_error(
        "reconstruct_w_head: moment residual above tolerance; the subspectrum is "
        "not consistent with the known kernel part",
        residual);

  std::vector<cplx> w1(g.n, cplx(0.0)), w2(g.n, cplx(0.0));
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < g.n; ++j) {
      w1[j] += c(i) * basis.vectors[i].f1[j];
      w2[j] += c(i) * basis.vectors[i].f2[j];
    }
  }
  for (int i = 0; i < 2 * P; ++i) {
    for (int j = 0; j < g.n; ++j) {
      w1[j] += c(T + i) * corr1[i][j];
      w2[j] += c(T + i) * corr2[i][j];
    }
  }
  return ReconstructResult{
      WPair(GridFunction(g, std::move(w1)), GridFunction(g, std::move(w2))),
      residual, score, c};
}

}  // namespace dirackit
