#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "dwr/driver.hpp"
#include "dwr/linear_solver.hpp"

namespace fs = std::filesystem;

namespace {

fs::path data_dir() {
  if (const char* env = std::getenv("DWR_DATA_DIR")) return env;
  return DWR_DATA_DIR;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented adaptive finite elements for the regularized p-Laplacian"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run a study from a config file or a built-in experiment name");

  std::string config;
  std::string mode;
  double max_dofs = 0.0;
  double tol = 0.0;
  std::string out;
  bool make_reference = false;
  bool quiet = false;
  run->add_option("config", config, "config file, or example1 / example2")->required();
  run->add_option("--mode", mode, "adaptive or uniform")->check(CLI::IsMember({"adaptive", "uniform"}));
  run->add_option("--max-dofs", max_dofs, "stop once the base space exceeds this many dofs");
  run->add_option("--tol", tol, "stop once |eta_h| falls below this value");
  run->add_option("--out", out, "output directory");
  run->add_flag("--make-reference", make_reference, "compute reference goal values on a uniform Q2 mesh");
  run->add_flag("-q,--quiet", quiet, "no progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  dwr::StudyConfig cfg;
  try {
    if (!fs::exists(config) && (config == "example1" || config == "example2"))
      cfg = dwr::experiment_defaults(config, data_dir());
    else
      cfg = dwr::load_config(config, data_dir());
    if (!mode.empty()) cfg.adapt.uniform = mode == "uniform";
    if (max_dofs > 0.0) {
      cfg.adapt.max_dofs = static_cast<std::size_t>(max_dofs);
      cfg.reference_max_dofs = static_cast<std::size_t>(max_dofs);
    }
    if (tol > 0.0) cfg.adapt.tol_dis = tol;
    if (!out.empty()) cfg.output_dir = out;
    if (!make_reference) dwr::resolve_reference(cfg);
  } catch (const dwr::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const dwr::GeometryError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    if (make_reference) {
      fs::create_directories(cfg.output_dir);
      const auto values = dwr::compute_reference(cfg, cfg.reference_max_dofs, log);
      const fs::path path = cfg.output_dir / "reference.txt";
      dwr::write_reference_file(path, values,
                                "uniform Q2 reference, max dofs " + std::to_string(cfg.reference_max_dofs));
      std::cout << path.string() << '\n';
      return 0;
    }
    const auto records = dwr::run_study(cfg, log);
    std::cout << "levels: " << records.size() << ", output in " << cfg.output_dir.string() << '\n';
  } catch (const dwr::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const dwr::LinearSolveError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const dwr::NewtonError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
