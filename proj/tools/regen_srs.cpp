#include <iostream>

#include <CLI11.hpp>

#include "regen_srs/io/commands.hpp"

using regen_srs::io::RunConfig;

namespace {

void common_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--streams", cfg.streams, "independent RNG streams");
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--backend", cfg.backend, "rational | float")->check(CLI::IsMember({"rational", "float"}));
  cmd->add_option("--tol", cfg.tol, "convergence tolerance");
  cmd->add_option("--max-iter", cfg.max_iter, "iteration cap");
  cmd->add_option("--cycles", cfg.cycles, "regeneration cycles per splitting estimate");
  cmd->add_option("--burn-in", cfg.burn_in, "steps discarded before sampling (default: sized from the splitting rate)");
  cmd->add_option("--samples", cfg.samples, "samples per stream");
  cmd->add_option("--horizon", cfg.horizon, "trajectory length");
  cmd->add_option("--x0", cfg.x0, "start state (default: grid bottom)");
  cmd->add_option("--c", cfg.c, "splitting threshold (default: sweep the grid)");
  cmd->add_option("--k-max", cfg.k_max, "largest k in the contraction profile");
  cmd->add_option("--replications", cfg.replications, "coupled runs");
  cmd->add_option("--block", cfg.block, "cycles per block for splitting");
  cmd->add_option("--max-tail", cfg.max_tail, "cycle mass the exact solver may leave unenumerated");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regen-srs: stochastic recursive sequences with regenerative drivers"};
  app.require_subcommand(1);
  RunConfig cfg;

  for (const char* verb : {"simulate", "couple", "splitting", "embedded", "stationary", "limit", "contraction", "validate"}) {
    auto* cmd = app.add_subcommand(verb);
    cmd->add_option("spec", cfg.spec_path, "spec JSON")->required()->check(CLI::ExistingFile);
    common_flags(cmd, cfg);
    cmd->callback([&cfg, verb] { cfg.verb = verb; });
  }
  auto* solve = app.add_subcommand("solve", "solve an economic model");
  solve->add_option("model", cfg.target, "huggett | growth | risksharing")
      ->required()
      ->check(CLI::IsMember({"huggett", "growth", "risksharing"}));
  solve->add_option("spec", cfg.spec_path, "spec JSON")->required()->check(CLI::ExistingFile);
  common_flags(solve, cfg);
  solve->callback([&cfg] { cfg.verb = "solve"; });

  auto* reproduce = app.add_subcommand("reproduce", "rebuild a worked example");
  reproduce->add_option("name", cfg.target, "example4")->required()->check(CLI::IsMember({"example4"}));
  common_flags(reproduce, cfg);
  reproduce->callback([&cfg] { cfg.verb = "reproduce"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : regen_srs::io::kValidation;
  }
  return regen_srs::io::run(cfg, cfg.verb == "validate" ? std::cout : std::cerr);
}
