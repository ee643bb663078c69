#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "fairfleet/cli.hpp"

using namespace fairfleet;

namespace {

void add_overrides(CLI::App* cmd, cli::RunConfig& cfg) {
  cmd->add_option("--seed", cfg.overrides.seed, "Seed for fleet positions and the request generator");
  cmd->add_option("--lambda", cfg.overrides.lambda, "Envy relaxation in [0, 1]")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--alpha", cfg.overrides.alpha, "History correction weight")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda-ko", cfg.overrides.lambda_ko, "Penalty per unassigned request")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--node-limit", cfg.node_limit, "Branch-and-bound node cap per batch (0 = exact)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair ride-sharing fleet simulator for temporal-logic requests"};
  app.require_subcommand(1);
  cli::RunConfig cfg;

  auto* run_cmd = app.add_subcommand("run", "Simulate one scenario");
  run_cmd->add_option("scenario", cfg.scenario, "Scenario JSON file")->required();
  run_cmd->add_option("-o,--out", cfg.out_dir, "Output directory")->required();
  run_cmd->add_flag("--timings", cfg.timings, "Include wall-clock phase timings in the summary");
  add_overrides(run_cmd, cfg);

  auto* ab_cmd = app.add_subcommand("ab", "Paired fair versus baseline sweep");
  ab_cmd->add_option("scenario", cfg.scenario, "Scenario JSON file")->required();
  ab_cmd->add_option("-o,--out", cfg.out_dir, "Output directory")->required();
  auto* veh = ab_cmd->add_option("--vehicles", cfg.vehicle_counts, "Fleet sizes to sweep")->delimiter(',');
  auto* req = ab_cmd->add_option("--requests", cfg.request_counts, "Request counts to sweep")->delimiter(',');
  veh->excludes(req);
  ab_cmd->add_option("--reps", cfg.reps, "Repetitions per point")->check(CLI::PositiveNumber);
  add_overrides(ab_cmd, cfg);

  GridSpec grid;
  std::string grid_out;
  auto* gen_cmd = app.add_subcommand("gen-network", "Write a synthetic grid map");
  gen_cmd->add_option("--rows", grid.rows)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--cols", grid.cols)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--min-weight", grid.min_weight)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-weight", grid.max_weight)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--density", grid.label_density)->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--landmarks", grid.landmarks)->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", grid.seed);
  gen_cmd->add_option("-o,--out", grid_out, "Output file (default stdout)");

  std::string formula;
  auto* check_cmd = app.add_subcommand("check-formula", "Parse a formula and print its automaton");
  check_cmd->add_option("formula", formula)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    if (*run_cmd) return cli::cmd_run(cfg, std::cout);
    if (*ab_cmd) {
      if (cfg.vehicle_counts.empty() && cfg.request_counts.empty()) {
        std::cerr << "ab: pass --vehicles or --requests\n";
        return cli::kUsage;
      }
      return cli::cmd_ab(cfg, std::cout);
    }
    if (*gen_cmd) {
      const auto net = RoadNetwork::build(generate_grid(grid));
      if (grid_out.empty()) {
        write_network(std::cout, net);
      } else {
        std::ofstream out(grid_out);
        if (!out) throw ConfigError(grid_out + ": cannot write");
        write_network(out, net);
      }
      return cli::kOk;
    }
    if (*check_cmd) return cli::cmd_check_formula(formula, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfig;
  }
  return cli::kUsage;
}
