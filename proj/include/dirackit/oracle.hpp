#pragma once

// Independent cross-validation solver: dense collocation of the boundary
// value problem into a standard matrix eigenvalue problem.
//
// The derivative is a high-order finite-difference matrix (Fornberg weights,
// biased stencils near the ends), the memory term a dense lower-triangular
// block with trapezoidal product weights, and the boundary conditions
// y_1(0) = y_1(pi) = 0 are imposed by eliminating those two unknowns and
// dropping the first-component collocation rows at the endpoints. Shares no
// integration code with the marching solver.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "dirackit/errors.hpp"
#include "dirackit/forward.hpp"
#include "dirackit/grid.hpp"

namespace dirackit {

namespace detail {

/// Fornberg's algorithm: weights of the m-th derivative at point z for the
/// given nodes. Exact (rational) recursion evaluated in doubles.
inline std::vector<double> fd_weights(double z, const std::vector<double>& x, int m) {
  const int nd = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(nd + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= nd; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(nd + 1);
  for (int i = 0; i <= nd; ++i) w[i] = c[i][m];
  return w;
}

}  // namespace detail

struct OracleOptions {
  int stencil_order = 6;   // interior accuracy of the derivative matrix
  double im_bound = 2.0;   // filter strip for reported eigenvalues
  double merge_tol = 1e-6;
  // Centered first-derivative stencils admit grid-scale (sawtooth) modes that
  // fold back to small |lambda|; eigenvectors whose normalized second
  // difference exceeds this are discarded as unresolved.
  double smoothness_limit = 1.0;
  // Imaginary 6th-difference dissipation: moves the sawtooth band to
  // Im lambda ~ -64 * dissipation (outside the search strip) while perturbing
  // smooth modes at O(dissipation * (lambda h)^6).
  double dissipation = 0.05;
};

/// The collocated operator, kept around for inspection in tests.
struct DenseDiscretization {
  Grid grid;
  Eigen::MatrixXcd L;  // squashed (2n-2) x (2n-2) standard eigenproblem
};

inline DenseDiscretization build_dense(const KernelPair& kernel,
                                       const OracleOptions& opt = {}) {
  const Grid& g = kernel.grid();
  detail::require_full_interval(g, "oracle");
  const int n = g.n;
  const int width = opt.stencil_order + 1;
  if (n < width) throw invalid_argument_error("oracle: grid too small for stencil");
  const double h = g.step();

  // derivative matrix rows (band of `width` nodes, biased at the ends)
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const int start = std::clamp(j - opt.stencil_order / 2, 0, n - width);
    std::vector<double> nodes(width);
    for (int i = 0; i < width; ++i) nodes[i] = g.node(start + i);
    const auto w = detail::fd_weights(g.node(j), nodes, 1);
    for (int i = 0; i < width; ++i) D(j, start + i) = w[i];
  }

  // Unknown layout after eliminating y1(0) and y1(pi):
  //   cols 0..n-3   -> y1 at interior nodes 1..n-2
  //   cols n-2..2n-3-> y2 at all nodes 0..n-1
  // Rows follow the same layout (first-component equations collocated at the
  // interior only), so L u = lambda u is a standard eigenproblem.
  const int nin = n - 2;
  const int dim = nin + n;
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(dim, dim);

  const auto& p = kernel.p.values();
  const auto& q = kernel.q.values();

  auto col_y1 = [&](int node) { return node - 1; };      // 1..n-2
  auto col_y2 = [&](int node) { return nin + node; };    // 0..n-1

  // trapezoidal product weights of (f * y)(x_j): h tau_k f[j-k] y[k];
  // the j = 0 integral is empty
  auto conv_weight = [&](int j, int k) {
    if (j == 0) return 0.0;
    const double tau = (k == 0 || k == j) ? 0.5 : 1.0;
    return h * tau;
  };

  // first-component equations at interior nodes:
  //   (D y2)_j + (p * y1)_j + (q * y2)_j = lambda y1_j
  for (int j = 1; j <= n - 2; ++j) {
    const int row = col_y1(j);
    for (int i = 0; i < n; ++i)
      if (D(j, i) != 0.0) L(row, col_y2(i)) += D(j, i);
    for (int k = 0; k <= j; ++k) {
      const double w = conv_weight(j, k);
      if (k >= 1 && k <= n - 2) L(row, col_y1(k)) += w * p[j - k];
      L(row, col_y2(k)) += w * q[j - k];
    }
  }

  // second-component equations at all nodes:
  //   -(D y1)_j - (q * y1)_j + (p * y2)_j = lambda y2_j
  for (int j = 0; j <= n - 1; ++j) {
    const int row = col_y2(j);
    for (int i = 1; i <= n - 2; ++i)
      if (D(j, i) != 0.0) L(row, col_y1(i)) -= D(j, i);
    for (int k = 0; k <= j; ++k) {
      const double w = conv_weight(j, k);
      if (k >= 1 && k <= n - 2) L(row, col_y1(k)) -= w * q[j - k];
      L(row, col_y2(k)) += w * p[j - k];
    }
  }

  // imaginary 6th-difference dissipation on both components
  if (opt.dissipation != 0.0) {
    const cplx nu(0.0, opt.dissipation);
    const double w6[7] = {1, -6, 15, -20, 15, -6, 1};
    for (int j = 3; j <= n - 4; ++j) {
      for (int i = 0; i < 7; ++i) {
        const int node = j - 3 + i;
        if (j >= 1 && j <= n - 2 && node >= 1 && node <= n - 2)
          L(col_y1(j), col_y1(node)) += nu * w6[i];
        L(col_y2(j), col_y2(node)) += nu * w6[i];
      }
    }
  }

  return DenseDiscretization{g, std::move(L)};
}

/// Eigenvalues of the dense pencil filtered to |Re| <= window + 1/2,
/// |Im| <= im_bound, indexed by nearest integer.
inline Spectrum oracle_eigenvalues(const KernelPair& kernel, int n, int window,
                                   const OracleOptions& opt = {}) {
  if (kernel.grid().n != n)
    throw invalid_argument_error("oracle_eigenvalues: kernel grid has different size");
  if (n > 1024)
    throw invalid_argument_error("oracle_eigenvalues: dense solve capped at n = 1024");

  auto dd = build_dense(kernel, opt);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(dd.L, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success)
    throw numeric_range_error("oracle_eigenvalues: dense eigensolver failed");

  const int nin = kernel.grid().n - 2;
  auto roughness = [&](int col) {
    // normalized second difference over each solution component
    const auto& V = es.eigenvectors();
    double num = 0.0, den = 0.0;
    auto scan = [&](int lo, int hi) {
      for (int i = lo; i <= hi; ++i) den += std::norm(V(i, col));
      for (int i = lo + 1; i < hi; ++i)
        num += std::norm(V(i + 1, col) - 2.0 * V(i, col) + V(i - 1, col));
    };
    scan(0, nin - 1);
    scan(nin, nin + kernel.grid().n - 1);
    return den > 0 ? std::sqrt(num / den) : 1e300;
  };

  std::vector<cplx> vals;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx z = es.eigenvalues()(i);
    if (std::abs(z.real()) <= window + 0.5 && std::abs(z.imag()) <= opt.im_bound &&
        roughness(i) <= opt.smoothness_limit)
      vals.push_back(z);
  }
  std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });

  // merge near-coincident values into multiplicities
  std::vector<SpectrumEntry> entries;
  for (const cplx& z : vals) {
    if (!entries.empty() && std::abs(entries.back().lambda - z) <= opt.merge_tol) {
      ++entries.back().multiplicity;
      continue;
    }
    entries.push_back(SpectrumEntry{static_cast<int>(std::lround(z.real())), z, 1});
  }
  return Spectrum{std::move(entries)};
}

}  // namespace dirackit
