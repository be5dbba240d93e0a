// wpansim: simulate | analyze | sweep
#include <CLI11.hpp>

#include "wpan/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Beacon-enabled 802.15.4 WPAN / clustered MANET simulator"};
  app.require_subcommand(1);

  wpan::cli::SimulateOptions sim;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "run one scenario and write metrics CSV");
  simulate->add_option("--scenario", sim.scenario, "scenario JSON file")->required();
  auto* seed_opt = simulate->add_option("--seed", seed, "RNG seed (defaults to the scenario's seed, else 1)");
  simulate->add_option("--out", sim.out, "metrics CSV path")->required();
  simulate->add_option("--trace", sim.trace, "event trace path");

  wpan::cli::AnalyzeOptions ana;
  auto* analyze = app.add_subcommand("analyze", "tracked vs untracked energy model over a (bo, so, rate) grid");
  analyze->add_option("--params", ana.params, "model parameter JSON file")->required();
  analyze->add_option("--bo", ana.bo, "beacon order range A..B")->capture_default_str();
  analyze->add_option("--so", ana.so, "superframe order range C..D")->capture_default_str();
  analyze->add_option("--rates", ana.rates, "comma-separated offered loads");
  analyze->add_option("--rate-unit", ana.rate_unit, "bps or Bps")->capture_default_str();
  analyze->add_option("--out", ana.out, "CSV path")->required();

  wpan::cli::SweepOptions swp;
  auto* sweep = app.add_subcommand("sweep", "run a scenario over a parameter grid and several seeds");
  sweep->add_option("--scenario", swp.scenario, "scenario JSON file")->required();
  sweep->add_option("--vary", swp.vary, "KEY=A..B or KEY=v1,v2 (repeatable)");
  sweep->add_option("--seeds", swp.seeds, "seeds per point")->capture_default_str();
  sweep->add_option("--out", swp.out, "output directory (or WPANSIM_OUT_DIR)");
  sweep->add_option("--jobs", swp.jobs, "worker threads (or WPANSIM_JOBS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : wpan::cli::kConfig;
  }

  if (*simulate) {
    if (*seed_opt) sim.seed = seed;
    return wpan::cli::cmd_simulate(sim);
  }
  if (*analyze) return wpan::cli::cmd_analyze(ana);
  return wpan::cli::cmd_sweep(swp);
}
