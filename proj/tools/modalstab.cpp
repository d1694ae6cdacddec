// modalstab: analyze, synthesize, certify, simulate and sweep modal plants.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "modalstab/cli.hpp"

namespace {

struct Overrides {
  std::optional<int> N;
  std::optional<double> epsilon;
  std::optional<double> margin_fraction;
  std::optional<int> beta_grid_size;
  std::optional<double> rank_tol;
  std::optional<double> beta;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<double> skip_fraction;
  std::optional<int> max_halvings;
  std::optional<std::string> controller;
};

modalstab::Json with_overrides(modalstab::Json j, const Overrides& o) {
  auto set = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  set("N", o.N);
  set("epsilon", o.epsilon);
  set("margin_fraction", o.margin_fraction);
  set("beta_grid_size", o.beta_grid_size);
  set("rank_tol", o.rank_tol);
  set("beta", o.beta);
  set("horizon", o.horizon);
  set("dt", o.dt);
  set("skip_fraction", o.skip_fraction);
  set("max_halvings", o.max_halvings);
  set("controller", o.controller);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-dimensional stabilization of modal PDE plants"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = ".";
  bool print_config = false;
  Overrides o;
  app.add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.add_option("--N", o.N, "truncation order");
  app.add_option("--epsilon", o.epsilon, "starting tail input bound");
  app.add_option("--margin-fraction", o.margin_fraction, "share of the spectral gap claimed as decay rate (default 0.5)");
  app.add_option("--beta-grid-size", o.beta_grid_size, "number of beta grid points (default 13)");
  app.add_option("--beta", o.beta, "certify at this beta only");
  app.add_option("--rank-tol", o.rank_tol, "relative PBH rank tolerance (default 1e-10)");
  app.add_option("--max-halvings", o.max_halvings, "epsilon halvings in the truncation search (default 40)");
  app.add_option("--horizon", o.horizon, "simulation horizon (default 10)");
  app.add_option("--dt", o.dt, "simulation output step (default 0.01)");
  app.add_option("--skip-fraction", o.skip_fraction, "transient share ignored by the decay fit (default 0.3)");
  app.add_option("--controller", o.controller, "controller file for certify/simulate (default <out>/controller.json)");
  app.fallthrough();
  const std::pair<const char*, const char*> commands[] = {
      {"analyze", "spectrum split and stabilizability verdict -> analysis.json"},
      {"synthesize", "truncation, observer controller and certificate -> controller.json, certificate.json"},
      {"certify", "small-gain certificate for an existing controller -> certificate.json"},
      {"simulate", "closed-loop trajectory and decay fit -> trajectory.csv, simulation.json"},
      {"sweep", "tail and loop gains over N_list -> sweep.csv"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : modalstab::cli::kSchemaError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  modalstab::cli::Context ctx;
  ctx.out_dir = out_dir;
  try {
    ctx.config = modalstab::config_from_json(with_overrides(modalstab::read_json_file(config_path), o));
  } catch (const modalstab::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return modalstab::cli::kSchemaError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return modalstab::cli::kSchemaError;
  }
  if (print_config) {
    std::cout << modalstab::config_to_json(ctx.config).dump(2) << "\n";
    return 0;
  }
  return modalstab::cli::run(command, ctx);
}
