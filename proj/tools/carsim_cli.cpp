// carsim: check, compute, verify and simulate carrying simplices of
// Kolmogorov maps from a JSON run configuration.

#include "carsim/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* cmd, carsim::CommandOptions& opt) {
  cmd->add_option("--config", opt.config_path, "run configuration (JSON)")->required();
  cmd->add_option("--out", opt.out_dir, "output directory (overrides CARSIM_OUT_DIR and the config)");
  cmd->add_option("--seed", opt.seed, "seed for the randomized batteries");
  cmd->add_option("--resolution", opt.resolution, "grid resolution m")->check(CLI::PositiveNumber);
  cmd->add_option("--tolerance", opt.tolerance, "stopping tolerance (radial sup norm)");
  cmd->add_option("--max-iter", opt.max_iter, "iteration cap")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carrying simplices of Kolmogorov maps by the graph transform"};
  app.require_subcommand(1);
  carsim::CommandOptions opt;

  auto* check = app.add_subcommand("check", "certify the standing assumptions; pick kappa and eps");
  add_common(check, opt);

  auto* compute = app.add_subcommand("compute", "compute sigma by the lower/upper sandwich");
  add_common(compute, opt);
  compute->add_flag("--dump-iterates", opt.dump_iterates, "write every lower/upper iterate as CSV");

  auto* verify = app.add_subcommand("verify", "run the property battery against a computed sigma");
  add_common(verify, opt);
  verify->add_option("--sigma", opt.sigma_path, "sigma CSV (default <out>/sigma.csv)");

  auto* simulate = app.add_subcommand("simulate", "iterate F from x0 and track the distance to sigma");
  add_common(simulate, opt);
  simulate->add_option("--x0", opt.x0, "start point, comma separated")->required();
  simulate->add_option("--steps", opt.steps, "number of steps (default: verify.horizon)");
  simulate->add_option("--sigma", opt.sigma_path, "sigma CSV to measure against");

  auto* iterates = app.add_subcommand("export-iterates", "compute and dump every iterate");
  add_common(iterates, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : carsim::exit_code::config;
  }

  if (check->parsed()) return carsim::run_check(opt);
  if (compute->parsed()) return carsim::run_compute(opt);
  if (verify->parsed()) return carsim::run_verify(opt);
  if (simulate->parsed()) return carsim::run_simulate(opt);
  if (iterates->parsed()) return carsim::run_export_iterates(opt);
  return carsim::exit_code::config;
}
