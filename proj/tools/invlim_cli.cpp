#include "invlim/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace invlim;

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic structure, invariant bundles and conjugacy solves on inverse limits"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
  };
  auto* hyp = app.add_subcommand("hyperbolic", "Axiom A checks and spectral decomposition");
  auto* bun = app.add_subcommand("bundles", "invariant bundle family and its seven structural checks");
  auto* con = app.add_subcommand("conjugacy", "solve the conjugacy equation for the perturbed map");
  auto* swp = app.add_subcommand("sweep", "run bundles or conjugacy over a parameter grid");
  auto* zoo = app.add_subcommand("zoo-list", "list the built-in systems");
  for (auto* s : {hyp, bun, con, swp}) add_common(s);

  std::vector<std::string> params;
  std::string mode = "bundles";
  int jobs = 1;
  swp->add_option("--param", params, "grid axis key=v1,v2,... (repeatable; cartesian product)");
  swp->add_option("--mode", mode, "bundles or conjugacy");
  swp->add_option("--jobs", jobs, "runs executed in parallel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (zoo->parsed()) {
    std::cout << zoo_list_text();
    return kExitOk;
  }
  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    RunResult r;
    if (hyp->parsed()) r = cmd_hyperbolic(cfg);
    else if (bun->parsed()) r = cmd_bundles(cfg);
    else if (con->parsed()) r = cmd_conjugacy(cfg);
    else {
      std::vector<SweepAxis> grid;
      for (const auto& p : params) grid.push_back(parse_sweep_axis(p));
      r = cmd_sweep(cfg, grid, mode, jobs);
    }
    (r.exit_code == kExitOk ? std::cout : std::cerr) << r.message << "\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheck;
  }
}
