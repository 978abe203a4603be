#pragma once

// Experiment drivers behind the command-line tool: configuration parsing,
// CSV/JSON emission, and the forward / invert / roundtrip / basis-diag
// commands. Kept header-only so tests can drive the exact code paths the
// binary runs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dirackit/basis.hpp"
#include "dirackit/errors.hpp"
#include "dirackit/forward.hpp"
#include "dirackit/grid.hpp"
#include "dirackit/inverse.hpp"
#include "dirackit/kernels.hpp"
#include "dirackit/oracle.hpp"
#include "dirackit/version.hpp"
#include "dirackit/wtransform.hpp"

namespace dirackit {

//------------------------------------------------------------------------
// Configuration: flat key = value text, overridable from the command line
//------------------------------------------------------------------------

struct Config {
  std::map<std::string, std::string> kv;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_argument_error("config: cannot open " + path);
    Config cfg;
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (!key.empty()) cfg.kv[key] = val;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { kv[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }
  int get_int(const std::string& key, int fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stoi(it->second);
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stoull(it->second);
  }

  /// FNV-1a over the canonical (sorted) key=value listing.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto eat = [&](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
    };
    for (const auto& [k, v] : kv) {
      eat(k);
      eat("=");
      eat(v);
      eat(";");
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }
};

//------------------------------------------------------------------------
// CSV helpers
//------------------------------------------------------------------------

namespace csv {

inline std::ofstream open_out(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path);
  if (!out) throw invalid_argument_error("cannot write " + path.string());
  out << "# dirackit " << kVersion << " config_hash=" << cfg.hash() << "\n";
  out << std::setprecision(17);
  return out;
}

inline void write_kernel(const std::filesystem::path& path, const Config& cfg,
                         const KernelPair& k) {
  auto out = open_out(path, cfg);
  out << "t,re_p,im_p,re_q,im_q\n";
  const Grid& g = k.grid();
  for (int j = 0; j < g.n; ++j)
    out << g.node(j) << ',' << k.p[j].real() << ',' << k.p[j].imag() << ','
        << k.q[j].real() << ',' << k.q[j].imag() << '\n';
}

inline void write_spectrum(const std::filesystem::path& path, const Config& cfg,
                           const Spectrum& sp,
                           const std::map<int, double>* oracle_dist = nullptr) {
  auto out = open_out(path, cfg);
  out << "k,re_lambda,im_lambda,multiplicity,kappa_sq_cum";
  if (oracle_dist) out << ",oracle_dist";
  out << '\n';
  // cumulative |kappa|^2 in |k|-major order
  std::vector<const SpectrumEntry*> order;
  for (const auto& e : sp.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const SpectrumEntry* a, const SpectrumEntry* b) {
    const int aa = std::abs(a->k), bb = std::abs(b->k);
    return aa != bb ? aa < bb : a->k < b->k;
  });
  std::map<int, double> cum;
  double run = 0.0;
  for (const auto* e : order) {
    run += std::norm(e->lambda - cplx(static_cast<double>(e->k)));
    cum[e->k] = run;
  }
  for (const auto& e : sp.entries) {
    out << e.k << ',' << e.lambda.real() << ',' << e.lambda.imag() << ','
        << e.multiplicity << ',' << cum[e.k];
    if (oracle_dist) {
      auto it = oracle_dist->find(e.k);
      out << ',' << (it == oracle_dist->end() ? std::nan("") : it->second);
    }
    out << '\n';
  }
}

inline void write_w(const std::filesystem::path& path, const Config& cfg,
                    const WPair& w) {
  auto out = open_out(path, cfg);
  out << "t,re_w1,im_w1,re_w2,im_w2\n";
  const Grid& g = w.grid();
  for (int j = 0; j < g.n; ++j)
    out << g.node(j) << ',' << w.w1[j].real() << ',' << w.w1[j].imag() << ','
        << w.w2[j].real() << ',' << w.w2[j].imag() << '\n';
}

inline void write_recon(const std::filesystem::path& path, const Config& cfg,
                        const KernelPair& rec, const KernelPair* truth) {
  auto out = open_out(path, cfg);
  out << "t,re_p_true,im_p_true,re_p_rec,im_p_rec,"
         "re_q_true,im_q_true,re_q_rec,im_q_rec,abs_err_p,abs_err_q\n";
  const Grid& g = rec.grid();
  const double nan = std::nan("");
  for (int j = 0; j < g.n; ++j) {
    const cplx pt = truth ? truth->p[j] : cplx(nan, nan);
    const cplx qt = truth ? truth->q[j] : cplx(nan, nan);
    out << g.node(j) << ',' << pt.real() << ',' << pt.imag() << ','
        << rec.p[j].real() << ',' << rec.p[j].imag() << ',' << qt.real() << ','
        << qt.imag() << ',' << rec.q[j].real() << ',' << rec.q[j].imag() << ','
        << (truth ? std::abs(rec.p[j] - pt) : nan) << ','
        << (truth ? std::abs(rec.q[j] - qt) : nan) << '\n';
  }
}

inline std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_argument_error("cannot read " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty()) rows.push_back(std::move(cells));
  }
  return rows;
}

inline KernelPair read_kernel(const std::string& path, const Grid& g) {
  auto rows = read_rows(path);
  if (rows.empty()) throw invalid_argument_error("kernel file is empty: " + path);
  std::size_t first = 0;
  if (!rows.empty() && rows[0].size() >= 5 && rows[0][0] == "t") first = 1;
  if (static_cast<int>(rows.size() - first) != g.n)
    throw invalid_argument_error("kernel file row count does not match grid");
  std::vector<cplx> p(g.n), q(g.n);
  for (int j = 0; j < g.n; ++j) {
    const auto& r = rows[first + j];
    if (r.size() < 5) throw invalid_argument_error("kernel file: short row");
    if (std::abs(std::stod(r[0]) - g.node(j)) > 1e-9)
      throw invalid_argument_error("kernel file: abscissa mismatch with grid");
    p[j] = cplx(std::stod(r[1]), std::stod(r[2]));
    q[j] = cplx(std::stod(r[3]), std::stod(r[4]));
  }
  return KernelPair(GridFunction(g, std::move(p)), GridFunction(g, std::move(q)));
}

inline std::vector<std::pair<int, cplx>> read_subspectrum(const std::string& path) {
  auto rows = read_rows(path);
  std::size_t first = 0;
  if (!rows.empty() && !rows[0].empty() && rows[0][0] == "k") first = 1;
  std::vector<std::pair<int, cplx>> vals;
  for (std::size_t i = first; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() < 3) throw invalid_argument_error("subspectrum file: short row");
    const int k = std::stoi(r[0]);
    const cplx lam(std::stod(r[1]), std::stod(r[2]));
    const int mult = r.size() >= 4 ? std::stoi(r[3]) : 1;
    for (int c = 0; c < mult; ++c) vals.emplace_back(k + c, lam);
  }
  return vals;
}

}  // namespace csv

//------------------------------------------------------------------------
// Shared experiment plumbing
//------------------------------------------------------------------------

struct ExperimentSetup {
  Grid grid;
  int m = 2;
  double a = 0.0;
  int window_S = 32;
  int window_N = 16;
  double tol_roundtrip = 1e-3;
  double tol_spectrum = 1e-4;
  std::filesystem::path out_dir;
};

inline ExperimentSetup make_setup(const Config& cfg) {
  ExperimentSetup s;
  s.m = cfg.get_int("m", 2);
  if (s.m < 2) throw invalid_argument_error("config: m must be >= 2");
  const int n_req = cfg.get_int("grid.n", 513);
  s.grid = Grid(0.0, kPi, aligned_grid_size(n_req, s.m));
  s.a = cfg.kv.count("a") ? cfg.get_double("a", 0.0) : kPi - kPi / s.m;
  s.window_S = cfg.get_int("window.S", 32);
  s.window_N = cfg.get_int("window.N", 16);
  s.tol_roundtrip = cfg.get_double("tol.roundtrip", 1e-3);
  s.tol_spectrum = cfg.get_double("tol.spectrum", 1e-4);
  s.out_dir = cfg.get("out.dir", "out");
  std::filesystem::create_directories(s.out_dir);
  return s;
}

inline KernelPair kernel_from_config(const Config& cfg, const Grid& g) {
  const std::string family = cfg.get("kernel.family", "trig");
  if (family == "file")
    return csv::read_kernel(cfg.get("kernel.file", ""), g);
  KernelFamilyOptions opt;
  opt.family = family;
  opt.amplitude = cfg.get_double("kernel.amplitude", 0.2);
  opt.terms = cfg.get_int("kernel.terms", 3);
  opt.complex_valued = cfg.get_int("kernel.complex", 1) != 0;
  opt.seed = cfg.get_u64("seed", 1);
  return make_kernel(g, opt);
}

inline void write_summary(const std::filesystem::path& path, const Config& cfg,
                          const nlohmann::json& body) {
  nlohmann::json j = body;
  j["version"] = kVersion;
  j["config_hash"] = cfg.hash();
  std::ofstream out(path);
  if (!out) throw invalid_argument_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

//------------------------------------------------------------------------
// Commands (return process exit codes)
//------------------------------------------------------------------------

inline int cmd_forward(const Config& cfg) {
  auto setup = make_setup(cfg);
  auto kernel = kernel_from_config(cfg, setup.grid);

  auto sp = eigenvalues(kernel, setup.window_N);

  std::optional<std::map<int, double>> oracle_col;
  if (cfg.get_int("forward.oracle", 0) != 0) {
    auto so = oracle_eigenvalues(kernel, setup.grid.n, setup.window_N);
    oracle_col.emplace();
    for (const auto& e : sp.entries) {
      const auto* o = so.find(e.k);
      if (o) (*oracle_col)[e.k] = std::abs(e.lambda - o->lambda);
    }
  }

  csv::write_kernel(setup.out_dir / "kernel.csv", cfg, kernel);
  csv::write_spectrum(setup.out_dir / "spectrum.csv", cfg, sp,
                      oracle_col ? &*oracle_col : nullptr);

  // Delta samples over the search window
  {
    auto out = csv::open_out(setup.out_dir / "delta.csv", cfg);
    out << "re_lambda,im_lambda,re_delta,im_delta\n";
    for (int i = 0; i <= 4 * setup.window_N + 2; ++i) {
      const cplx lam(-(setup.window_N + 0.5) + 0.5 * i, 0.0);
      const cplx d = char_fn(kernel, lam);
      out << lam.real() << ',' << lam.imag() << ',' << d.real() << ',' << d.imag()
          << '\n';
    }
  }

  double kappa_sq = 0.0;
  for (const auto& k : sp.kappas()) kappa_sq += std::norm(k);
  double oracle_worst = 0.0;
  if (oracle_col)
    for (const auto& [k, d] : *oracle_col) oracle_worst = std::max(oracle_worst, d);

  nlohmann::json j{{"command", "forward"},
                   {"grid_n", setup.grid.n},
                   {"window_N", setup.window_N},
                   {"eigenvalue_count", sp.entries.size()},
                   {"kappa_sq_total", kappa_sq}};
  if (oracle_col) {
    j["oracle_max_distance"] = oracle_worst;
    j["oracle_pass"] = oracle_worst <= setup.tol_spectrum;
  }
  write_summary(setup.out_dir / "summary.json", cfg, j);
  return 0;
}

namespace detail {

struct InvertOutcome {
  KernelPair kernel;
  Algorithm1Diagnostics diag;
  double spectrum_defect = 0.0;  // max |Delta_rec(lambda_k)|
};

inline InvertOutcome run_algorithm1(const KnownPart& known, const Subspectrum& sub,
                                    const InverseOptions& opt) {
  auto res = algorithm1(known, sub, opt);
  double worst = 0.0;
  for (const auto& e : sub.distinct)
    worst = std::max(worst, std::abs(char_fn(res.kernel, e.lambda)));
  return InvertOutcome{std::move(res.kernel), std::move(res.diag), worst};
}

inline nlohmann::json stage_json(const Algorithm1Diagnostics& d, double spectrum_defect,
                                 double tol_spectrum) {
  return nlohmann::json{
      {"band", d.band},
      {"known_extraction_residual", d.known_extraction_residual},
      {"completeness_score", d.completeness_score},
      {"gram_condition", d.gram_condition},
      {"head_residual", d.head_residual},
      {"tail_consistency", d.tail_consistency},
      {"fixed_point",
       {{"iterations", d.fixed_point.iterations},
        {"final_mismatch", d.fixed_point.final_mismatch},
        {"final_damping", d.fixed_point.final_damping}}},
      {"spectrum_defect", spectrum_defect},
      {"spectrum_pass", spectrum_defect <= tol_spectrum}};
}

}  // namespace detail

inline int cmd_invert(const Config& cfg, const std::string& known_file,
                      const std::string& subspectrum_file,
                      const std::string& truth_file = {}) {
  auto setup = make_setup(cfg);

  auto known_kernel = csv::read_kernel(known_file, setup.grid);
  auto known = KnownPart::truncate(known_kernel, setup.a);

  auto vals = csv::read_subspectrum(subspectrum_file);
  // numbering sanity: data outside |lambda_k - k| <= 1/2 cannot be numbered
  // consistently with the eigenvalue asymptotics
  for (const auto& [k, lam] : vals)
    if (std::abs(lam.real() - k) > 0.5)
      throw inconsistent_data_error(
          "subspectrum entry " + std::to_string(k) + " violates the numbering bound",
          std::abs(lam.real() - k));
  auto sub = Subspectrum::from_values(std::move(vals));

  auto outcome = detail::run_algorithm1(known, sub, {});

  std::optional<KernelPair> truth;
  if (!truth_file.empty()) truth.emplace(csv::read_kernel(truth_file, setup.grid));

  csv::write_recon(setup.out_dir / "recon.csv", cfg, outcome.kernel,
                   truth ? &*truth : nullptr);

  nlohmann::json j{{"command", "invert"},
                   {"grid_n", setup.grid.n},
                   {"m", setup.m},
                   {"a", setup.a},
                   {"stages", detail::stage_json(outcome.diag, outcome.spectrum_defect,
                                                 setup.tol_spectrum)}};
  bool pass = outcome.spectrum_defect <= setup.tol_spectrum;
  if (truth) {
    const double err = weighted_rel_error(outcome.kernel, *truth, setup.a);
    j["rel_err"] = err;
    j["rel_err_pass"] = err <= setup.tol_roundtrip;
    pass = pass && err <= setup.tol_roundtrip;
  }
  j["pass"] = pass;
  write_summary(setup.out_dir / "summary.json", cfg, j);
  return pass ? 0 : 2;
}

inline int cmd_roundtrip(const Config& cfg) {
  auto setup = make_setup(cfg);
  auto truth = kernel_from_config(cfg, setup.grid);
  auto known = KnownPart::truncate(truth, setup.a);

  std::vector<int> idx;
  for (int s = -setup.window_S; s <= setup.window_S; ++s) idx.push_back(s * setup.m);
  auto sp = eigenvalues_at_indices(truth, idx);
  auto sub = Subspectrum::progression(sp, setup.m, setup.window_S);

  auto outcome = detail::run_algorithm1(known, sub, {});
  const double err = weighted_rel_error(outcome.kernel, truth, setup.a);

  csv::write_kernel(setup.out_dir / "kernel.csv", cfg, truth);
  csv::write_spectrum(setup.out_dir / "spectrum.csv", cfg, sp);
  csv::write_recon(setup.out_dir / "recon.csv", cfg, outcome.kernel, &truth);
  {
    // assembled transform pair of the reconstruction, for plots
    InverseOptions iopt;
    auto plan = ExtractionPlan::build(
        setup.grid,
        detail::extraction_options(iopt, outcome.diag.band, setup.grid, known.b()));
    auto ex = plan.fit(plan.sample_data(outcome.kernel));
    csv::write_w(setup.out_dir / "w.csv", cfg, ex.w);
  }

  const bool pass =
      err <= setup.tol_roundtrip && outcome.spectrum_defect <= setup.tol_spectrum;
  nlohmann::json j{{"command", "roundtrip"},
                   {"grid_n", setup.grid.n},
                   {"m", setup.m},
                   {"window_S", setup.window_S},
                   {"rel_err", err},
                   {"rel_err_pass", err <= setup.tol_roundtrip},
                   {"stages", detail::stage_json(outcome.diag, outcome.spectrum_defect,
                                                 setup.tol_spectrum)},
                   {"pass", pass}};
  write_summary(setup.out_dir / "summary.json", cfg, j);

  std::ostringstream line;
  line << "rel_err = " << std::scientific << std::setprecision(3) << err
       << (err <= setup.tol_roundtrip ? ": PASS" : ": FAIL");
  std::ofstream(setup.out_dir / "result.txt") << line.str() << '\n';
  std::puts(line.str().c_str());
  return pass ? 0 : 2;
}

inline int cmd_basis_diag(const Config& cfg) {
  auto setup = make_setup(cfg);
  const double b = kPi - setup.a;
  Grid head(0.0, b, (setup.grid.n - 1) / setup.m + 1);

  // synthetic progression with seeded perturbations in the admissible class
  std::mt19937_64 rng(cfg.get_u64("seed", 1));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double amp = cfg.get_double("basis.perturbation", 0.05);
  std::vector<std::pair<int, cplx>> vals;
  for (int s = -setup.window_S; s <= setup.window_S; ++s) {
    const double decay = amp / std::sqrt(1.0 + std::abs(s));
    vals.emplace_back(s * setup.m,
                      cplx(s * setup.m + decay * u(rng), 0.4 * decay * u(rng)));
  }
  auto sub = Subspectrum::from_values(std::move(vals));
  auto basis = build_basis(sub, head);
  const double score = completeness_score(basis);
  const double cond = gram_condition(gram(basis));

  nlohmann::json j{{"command", "basis-diag"},
                   {"m", setup.m},
                   {"b", b},
                   {"window_S", setup.window_S},
                   {"vector_count", basis.count()},
                   {"completeness_score", score},
                   {"score_over_sqrt_b", score / std::sqrt(b)},
                   {"gram_condition", cond}};
  write_summary(setup.out_dir / "summary.json", cfg, j);
  return 0;
}

}  // namespace dirackit
