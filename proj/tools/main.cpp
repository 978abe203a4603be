// Command-line front end: forward solves, inverse reconstructions,
// round-trip experiments and basis diagnostics.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "dirackit/experiments.hpp"
#include "dirackit/version.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string seed, grid, m, window, tol;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "configuration file (key = value lines)");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--seed", f.seed, "random seed (u64)");
  cmd->add_option("--grid", f.grid, "grid point count");
  cmd->add_option("--m", f.m, "interval parameter: a = pi - pi/m");
  cmd->add_option("--window", f.window, "subspectrum half-window S");
  cmd->add_option("--tol", f.tol, "round-trip error tolerance");
}

dirackit::Config build_config(const CommonFlags& f) {
  dirackit::Config cfg;
  if (!f.config_path.empty()) cfg = dirackit::Config::from_file(f.config_path);
  if (!f.out_dir.empty()) cfg.set("out.dir", f.out_dir);
  if (!f.seed.empty()) cfg.set("seed", f.seed);
  if (!f.grid.empty()) cfg.set("grid.n", f.grid);
  if (!f.m.empty()) cfg.set("m", f.m);
  if (!f.window.empty()) cfg.set("window.S", f.window);
  if (!f.tol.empty()) cfg.set("tol.roundtrip", f.tol);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dirackit: forward and partial-inverse spectral problems for the "
               "integro-differential Dirac system"};
  app.set_version_flag("--version", dirackit::kVersion);
  app.require_subcommand(1);

  CommonFlags fw, inv, rt, bd;
  std::string known_file, subspectrum_file, truth_file;

  auto* forward = app.add_subcommand("forward", "spectrum and Delta samples of a kernel");
  add_common(forward, fw);

  auto* invert = app.add_subcommand(
      "invert", "reconstruct the kernel on (a, pi) from known part + subspectrum");
  add_common(invert, inv);
  invert->add_option("--known", known_file, "known-part kernel.csv")->required();
  invert->add_option("--subspectrum", subspectrum_file, "subspectrum spectrum.csv")
      ->required();
  invert->add_option("--truth", truth_file, "reference kernel.csv for error metrics");

  auto* roundtrip = app.add_subcommand(
      "roundtrip", "generate, truncate, reconstruct and report error metrics");
  add_common(roundtrip, rt);

  auto* basis_diag =
      app.add_subcommand("basis-diag", "completeness diagnostics of the basis system");
  add_common(basis_diag, bd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (forward->parsed()) return dirackit::cmd_forward(build_config(fw));
    if (invert->parsed())
      return dirackit::cmd_invert(build_config(inv), known_file, subspectrum_file,
                                  truth_file);
    if (roundtrip->parsed()) return dirackit::cmd_roundtrip(build_config(rt));
    if (basis_diag->parsed()) return dirackit::cmd_basis_diag(build_config(bd));
  } catch (const dirackit::inconsistent_data_error& e) {
    std::fprintf(stderr, "inconsistent data: %s (residual %.3e)\n", e.what(), e.residual);
    return 2;
  } catch (const dirackit::error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
