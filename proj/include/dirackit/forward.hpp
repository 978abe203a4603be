#pragma once

// Forward spectral problem for the first-order 2x2 system
//
//   B y' + int_0^x M(x - t) y(t) dt = lambda y,   y_1(0) = y_1(pi) = 0,
//
// with B = ((0,1),(-1,0)) and M built from the kernel pair (p, q).
// Provides the initial-value marcher, the characteristic function
// Delta(lambda) = -y_1(pi) (normalized so the free case gives sin(lambda pi)),
// its lambda-derivatives, and the eigenvalue search (Newton seeded at the
// integers, verified by argument-principle counts over unit boxes).

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dirackit/errors.hpp"
#include "dirackit/grid.hpp"

namespace dirackit {

//------------------------------------------------------------------------
// Types
//------------------------------------------------------------------------

struct KernelPair {
  GridFunction p, q;

  KernelPair(GridFunction p_, GridFunction q_) : p(std::move(p_)), q(std::move(q_)) {
    detail::require_same_grid(p, q, "KernelPair");
  }

  const Grid& grid() const { return p.grid(); }
};

struct StateVector {
  cplx y1{0.0}, y2{0.0};
};

struct SpectrumEntry {
  int k = 0;           // spectral index (nearest integer numbering)
  cplx lambda{0.0};
  int multiplicity = 1;
};

struct Spectrum {
  std::vector<SpectrumEntry> entries;  // sorted by index, strictly increasing

  const SpectrumEntry* find(int k) const {
    for (const auto& e : entries)
      if (e.k == k) return &e;
    return nullptr;
  }

  /// kappa_k = lambda_k - k for every entry (repeated per multiplicity).
  std::vector<cplx> kappas() const {
    std::vector<cplx> out;
    for (const auto& e : entries)
      for (int j = 0; j < e.multiplicity; ++j)
        out.push_back(e.lambda - cplx(static_cast<double>(e.k + j)));
    return out;
  }
};

struct ForwardOptions {
  double im_bound = 2.0;       // Y: half-height of the eigenvalue search strip
  double newton_tol = 1e-12;   // relative step tolerance
  int max_newton = 60;
  double merge_tol = 1e-6;     // eigenvalues closer than this are one root
  bool verify_boxes = true;    // argument-principle verification
  int max_contour_depth = 14;
};

//------------------------------------------------------------------------
// Initial-value marcher
//------------------------------------------------------------------------

namespace detail {

inline void require_full_interval(const Grid& g, const char* who) {
  if (!g.is_full_interval())
    throw grid_mismatch_error(std::string(who) + ": kernel must live on the full (0, pi) grid");
}

}  // namespace detail

/// Value at x = pi of the solution with y(0) = (0, 1).
///
/// The system is rewritten as y' = lambda B^{-1} y - B^{-1} (M * y)(x) and
/// marched with the exact rotation propagator for the local part and a
/// trapezoidal product rule for the memory term; the new node's own
/// contribution is folded in implicitly (2x2 solve), so the scheme is
/// second order in h and exact when p = q = 0.
inline StateVector solve_ivp(const KernelPair& kernel, cplx lambda) {
  const Grid& g = kernel.grid();
  detail::require_full_interval(g, "solve_ivp");
  const int n = g.n;
  const double h = g.step();
  const double h2 = 0.5 * h;

  const cplx rc = std::cos(lambda * h), rs = std::sin(lambda * h);
  if (!std::isfinite(rc.real()) || !std::isfinite(rc.imag()))
    throw numeric_range_error("solve_ivp: rotation overflow at lambda");

  const std::vector<cplx>& p = kernel.p.values();
  const std::vector<cplx>& q = kernel.q.values();
  const cplx p0 = p[0], q0 = q[0];
  const double alpha = h2 * h2;

  // Implicit 2x2 factor for the end-node convolution weight:
  //   (1 + a q0) y1 - a p0 y2 = rhs1,   a p0 y1 + (1 + a q0) y2 = rhs2.
  const cplx iaq = 1.0 + alpha * q0;
  const cplx iap = alpha * p0;
  const cplx idet = 1.0 / (iaq * iaq + iap * iap);

  std::vector<cplx> y1(n), y2(n);
  y1[0] = cplx(0.0);
  y2[0] = cplx(1.0);
  cplx conv1 = 0.0, conv2 = 0.0;  // (M * y)(x_j), fully assembled

  const double guard2 = 1e240;  // squared magnitude guard

  for (int j = 0; j + 1 < n; ++j) {
    // nonlocal forcing g = ((M*y)_2, -(M*y)_1)
    const cplx g1 = conv2, g2 = -conv1;
    const cplx h1 = y1[j] + h2 * g1;
    const cplx h2v = y2[j] + h2 * g2;
    const cplx r1 = rc * h1 - rs * h2v;
    const cplx r2 = rs * h1 + rc * h2v;

    // partial convolution at x_{j+1} over nodes 0..j (node j+1 is implicit)
    cplx pc1 = 0.5 * (p[j + 1] * y1[0] + q[j + 1] * y2[0]);
    cplx pc2 = 0.5 * (-q[j + 1] * y1[0] + p[j + 1] * y2[0]);
    for (int k = 1; k <= j; ++k) {
      const cplx pk = p[j + 1 - k], qk = q[j + 1 - k];
      const cplx a = y1[k], b = y2[k];
      pc1 += pk * a + qk * b;
      pc2 += -qk * a + pk * b;
    }
    pc1 *= h;
    pc2 *= h;

    const cplx rhs1 = r1 + h2 * pc2;
    const cplx rhs2 = r2 - h2 * pc1;
    const cplx v1 = (iaq * rhs1 + iap * rhs2) * idet;
    const cplx v2 = (-iap * rhs1 + iaq * rhs2) * idet;
    y1[j + 1] = v1;
    y2[j + 1] = v2;

    conv1 = pc1 + h2 * (p0 * v1 + q0 * v2);
    conv2 = pc2 + h2 * (-q0 * v1 + p0 * v2);

    if (std::norm(v1) > guard2 || std::norm(v2) > guard2) {
      std::ostringstream os;
      os << "solve_ivp: solution overflow at lambda = (" << lambda.real() << ", "
         << lambda.imag() << ")";
      throw numeric_range_error(os.str());
    }
  }
  return StateVector{y1[n - 1], y2[n - 1]};
}

/// Characteristic function Delta(lambda) = -y_1(pi); free case: sin(lambda pi).
inline cplx char_fn(const KernelPair& kernel, cplx lambda) {
  return -solve_ivp(kernel, lambda).y1;
}

/// j-th lambda-derivative of Delta by central differences (j <= 4).
/// Step 1e-4 (1 + |lambda|) for j = 1, scaled up threefold per extra order.
inline cplx char_fn_dlambda(const KernelPair& kernel, cplx lambda, int order) {
  if (order < 0 || order > 4)
    throw unsupported_operation_error("char_fn_dlambda: order must be in 0..4");
  if (order == 0) return char_fn(kernel, lambda);
  const double s = 1e-4 * (1.0 + std::abs(lambda)) * std::pow(3.0, order - 1);
  auto d = [&](double u) { return char_fn(kernel, lambda + cplx(u)); };
  switch (order) {
    case 1:
      return (d(s) - d(-s)) / (2.0 * s);
    case 2:
      return (d(s) - 2.0 * d(0.0) + d(-s)) / (s * s);
    case 3:
      return (d(2 * s) - 2.0 * d(s) + 2.0 * d(-s) - d(-2 * s)) / (2.0 * s * s * s);
    default:
      return (d(2 * s) - 4.0 * d(s) + 6.0 * d(0.0) - 4.0 * d(-s) + d(-2 * s)) /
             (s * s * s * s);
  }
}

//------------------------------------------------------------------------
// Root finding
//------------------------------------------------------------------------

namespace detail {

struct RootResult {
  cplx lambda{0.0};
  bool converged = false;
  int iterations = 0;
};

inline RootResult newton_root(const KernelPair& kernel, cplx seed,
                              const ForwardOptions& opt) {
  cplx lam = seed;
  cplx prev_step = 0.0;
  double accel = 1.0;  // multiple-root acceleration factor
  for (int it = 0; it < opt.max_newton; ++it) {
    const cplx d0 = char_fn(kernel, lam);
    const cplx d1 = char_fn_dlambda(kernel, lam, 1);
    if (std::abs(d1) < 1e-300) return {lam, false, it};
    const cplx step = d0 / d1;
    lam -= accel * step;
    const double tol = opt.newton_tol * (1.0 + std::abs(lam));
    if (std::abs(step) * accel <= tol) return {lam, true, it + 1};
    // Near a root of multiplicity m Newton contracts linearly with ratio
    // (m-1)/m; once the ratio stabilizes, step by m instead.
    if (it >= 6 && std::abs(prev_step) > 0) {
      const double rho = std::abs(step) / std::abs(prev_step);
      if (rho > 0.40 && rho < 0.93) {
        const double m_est = std::round(1.0 / (1.0 - rho));
        if (m_est >= 2 && m_est <= 4) accel = m_est;
      }
    }
    prev_step = step;
  }
  return {lam, false, opt.max_newton};
}

// Winding number of Delta along the rectangle [re0, re1] x [-Y, Y],
// divided by 2 pi. Adaptive subdivision keeps phase increments below pi/2.
inline int box_zero_count(const KernelPair& kernel, double re0, double re1,
                          const ForwardOptions& opt, const char* box_name) {
  const double Y = opt.im_bound;
  const cplx corners[5] = {cplx(re0, -Y), cplx(re1, -Y), cplx(re1, Y),
                           cplx(re0, Y), cplx(re0, -Y)};
  double winding = 0.0;

  struct Seg {
    cplx za, zb;
    cplx fa, fb;
    int depth;
  };

  auto phase_inc = [](cplx fa, cplx fb) {
    return std::arg(fb / fa);
  };

  for (int e = 0; e < 4; ++e) {
    const cplx za = corners[e], zb = corners[e + 1];
    const int init = 8;
    std::vector<Seg> stack;
    cplx zprev = za, fprev = char_fn(kernel, za);
    for (int i = 1; i <= init; ++i) {
      const cplx z = za + (zb - za) * (static_cast<double>(i) / init);
      stack.push_back(Seg{zprev, z, fprev, char_fn(kernel, z), 0});
      zprev = z;
      fprev = stack.back().fb;
    }
    // consume in order
    for (std::size_t s = 0; s < stack.size(); ++s) {
      Seg seg = stack[s];
      std::vector<Seg> local{seg};
      while (!local.empty()) {
        Seg cur = local.back();
        local.pop_back();
        if (std::abs(cur.fa) < 1e-13 || std::abs(cur.fb) < 1e-13) {
          std::ostringstream os;
          os << "eigenvalues: characteristic function vanishes on the contour of box "
             << box_name;
          throw numeric_range_error(os.str());
        }
        const double dph = phase_inc(cur.fa, cur.fb);
        if (std::abs(dph) <= 0.5 * kPi) {
          winding += dph;
          continue;
        }
        if (cur.depth >= opt.max_contour_depth) {
          std::ostringstream os;
          os << "eigenvalues: contour refinement exhausted on box " << box_name;
          throw convergence_error(os.str(), {});
        }
        const cplx zm = 0.5 * (cur.za + cur.zb);
        const cplx fm = char_fn(kernel, zm);
        // push right half then left half so the left is processed first
        local.push_back(Seg{zm, cur.zb, fm, cur.fb, cur.depth + 1});
        local.push_back(Seg{cur.za, zm, cur.fa, fm, cur.depth + 1});
      }
    }
  }
  const double count = winding / (2.0 * kPi);
  const long rounded = std::lround(count);
  if (std::abs(count - rounded) > 0.2) {
    std::ostringstream os;
    os << "eigenvalues: non-integer winding " << count << " on box " << box_name;
    throw convergence_error(os.str(), {});
  }
  return static_cast<int>(rounded);
}

struct Cluster {
  cplx lambda{0.0};
  int count = 1;  // how many Newton runs landed here (not the multiplicity)
};

inline void add_to_clusters(std::vector<Cluster>& cs, cplx lam, double tol) {
  for (auto& c : cs) {
    if (std::abs(c.lambda - lam) <= tol) {
      c.lambda = (c.lambda * static_cast<double>(c.count) + lam) /
                 static_cast<double>(c.count + 1);
      ++c.count;
      return;
    }
  }
  cs.push_back(Cluster{lam, 1});
}

}  // namespace detail

//------------------------------------------------------------------------
// Eigenvalue search
//------------------------------------------------------------------------

/// All eigenvalues with |Re lambda| <= N + 1/2 and |Im lambda| <= Y.
///
/// Newton iterations seeded at the integers locate the roots; each unit box
/// [k - 1/2, k + 1/2] x [-Y, Y] is then verified by an argument-principle
/// count, which also fixes multiplicities. Indices are assigned by nearest
/// integer, with a global positional fallback when boxes disagree locally.
inline Spectrum eigenvalues(const KernelPair& kernel, int window,
                            const ForwardOptions& opt = {}) {
  if (window < 1) throw invalid_argument_error("eigenvalues: window must be >= 1");

  std::vector<detail::Cluster> clusters;
  for (int k = -window; k <= window; ++k) {
    const auto r = detail::newton_root(kernel, cplx(static_cast<double>(k)), opt);
    if (!r.converged) continue;
    if (std::abs(r.lambda.real()) > window + 0.5 + 1e-9) continue;
    if (std::abs(r.lambda.imag()) > opt.im_bound) continue;
    detail::add_to_clusters(clusters, r.lambda, opt.merge_tol);
  }

  // Per-box multiplicity from the argument principle.
  std::map<int, int> box_count;
  std::map<int, std::vector<std::size_t>> box_clusters;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const int k = static_cast<int>(std::lround(clusters[i].lambda.real()));
    box_clusters[std::max(-window, std::min(window, k))].push_back(i);
  }

  std::vector<SpectrumEntry> flat;  // one entry per root, multiplicity folded
  for (int k = -window; k <= window; ++k) {
    auto it = box_clusters.find(k);
    const int found = it == box_clusters.end() ? 0 : static_cast<int>(it->second.size());
    int count = found;
    if (opt.verify_boxes) {
      std::ostringstream name;
      name << "[" << k - 0.5 << ", " << k + 0.5 << "]";
      count = detail::box_zero_count(kernel, k - 0.5, k + 0.5, opt, name.str().c_str());
      if (count < found) {
        std::ostringstream os;
        os << "eigenvalues: box " << name.str() << " holds " << count
           << " zeros but Newton found " << found << " distinct roots";
        throw convergence_error(os.str(), {});
      }
      if (count > found) {
        // try to recover missed distinct roots from off-center seeds
        const cplx extra_seeds[4] = {cplx(k - 0.22, 0.0), cplx(k + 0.22, 0.0),
                                     cplx(k, 0.35), cplx(k, -0.35)};
        for (const cplx& s : extra_seeds) {
          const auto r = detail::newton_root(kernel, s, opt);
          if (r.converged && std::abs(r.lambda.real() - k) <= 0.5 &&
              std::abs(r.lambda.imag()) <= opt.im_bound)
            detail::add_to_clusters(clusters, r.lambda, opt.merge_tol);
        }
        box_clusters.clear();
        for (std::size_t i = 0; i < clusters.size(); ++i) {
          const int kk = static_cast<int>(std::lround(clusters[i].lambda.real()));
          box_clusters[std::max(-window, std::min(window, kk))].push_back(i);
        }
        it = box_clusters.find(k);
      }
    }
    if (it == box_clusters.end()) continue;

    const auto& idx = it->second;
    if (static_cast<int>(idx.size()) == count || !opt.verify_boxes) {
      for (std::size_t i : idx)
        flat.push_back(SpectrumEntry{k, clusters[i].lambda, 1});
    } else {
      // fewer distinct roots than zeros: distribute the excess as multiplicity
      // over the clusters, validated below by derivative thresholds.
      const int excess = count - static_cast<int>(idx.size());
      for (std::size_t pos = 0; pos < idx.size(); ++pos) {
        const int mult = pos == 0 ? 1 + excess : 1;
        flat.push_back(SpectrumEntry{k, clusters[idx[pos]].lambda, mult});
      }
    }
  }

  // Sort by (Re, Im) and assign indices. Without collisions the rounded
  // index is kept; otherwise indices are assigned positionally.
  std::sort(flat.begin(), flat.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() < b.lambda.real();
    return a.lambda.imag() < b.lambda.imag();
  });
  bool collision = false;
  {
    std::map<int, int> seen;
    for (const auto& e : flat) seen[e.k] += e.multiplicity;
    for (const auto& [k, c] : seen)
      if (c > 1) collision = true;
  }
  if (collision) {
    int total = 0;
    for (const auto& e : flat) total += e.multiplicity;
    if (total != 2 * window + 1) {
      std::ostringstream os;
      os << "eigenvalues: cannot number " << total << " roots into window "
         << 2 * window + 1;
      throw convergence_error(os.str(), {});
    }
    int k = -window;
    for (auto& e : flat) {
      e.k = k;
      k += e.multiplicity;
    }
  }

  // Multiplicity sanity: |Delta^{(j)}| small below the multiplicity.
  for (const auto& e : flat) {
    if (e.multiplicity > 1) {
      const double scale = std::max(1.0, std::abs(char_fn_dlambda(kernel, e.lambda,
                                                                  e.multiplicity)));
      for (int j = 1; j < e.multiplicity; ++j) {
        if (std::abs(char_fn_dlambda(kernel, e.lambda, j)) > 0.05 * scale) {
          std::ostringstream os;
          os << "eigenvalues: derivative threshold contradicts multiplicity "
             << e.multiplicity << " at index " << e.k;
          throw convergence_error(os.str(), {});
        }
      }
    }
  }

  return Spectrum{std::move(flat)};
}

/// Targeted search: Newton from each requested index only, verified per box.
/// Falls back on the caller to use eigenvalues() for ill-separated spectra.
inline Spectrum eigenvalues_at_indices(const KernelPair& kernel,
                                       const std::vector<int>& indices,
                                       const ForwardOptions& opt = {}) {
  std::vector<SpectrumEntry> out;
  for (int k : indices) {
    const auto r = detail::newton_root(kernel, cplx(static_cast<double>(k)), opt);
    if (!r.converged) {
      std::ostringstream os;
      os << "eigenvalues_at_indices: Newton failed at seed " << k;
      throw convergence_error(os.str(), {});
    }
    if (std::abs(r.lambda.real() - k) > 0.5) {
      std::ostringstream os;
      os << "eigenvalues_at_indices: root " << r.lambda.real() << " strays from index "
         << k << "; use the full search";
      throw convergence_error(os.str(), {});
    }
    int mult = 1;
    if (opt.verify_boxes) {
      std::ostringstream name;
      name << "[" << k - 0.5 << ", " << k + 0.5 << "]";
      mult = detail::box_zero_count(kernel, k - 0.5, k + 0.5, opt, name.str().c_str());
      if (mult < 1) {
        throw convergence_error("eigenvalues_at_indices: box count lost the root at index " +
                                    std::to_string(k),
                                {});
      }
    }
    out.push_back(SpectrumEntry{k, r.lambda, mult});
  }
  std::sort(out.begin(), out.end(),
            [](const SpectrumEntry& a, const SpectrumEntry& b) { return a.k < b.k; });
  return Spectrum{std::move(out)};
}

}  // namespace dirackit
