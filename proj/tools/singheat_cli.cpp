#include "singheat/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"singheat: heat equation with a boundary inverse-square potential"};
  app.require_subcommand(1);
  std::string config;
  singheat::RunOptions opt;
  opt.workers = singheat::default_workers();
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--config", config, "scenario JSON file")->required();
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", opt.strict, "require a positive relative margin in the pointwise audit");
  app.fallthrough();
  for (const char* name : {"audit-weights", "hardy", "simulate", "control", "observability", "report"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) opt.seed = seed;
  const std::string name = app.get_subcommands().front()->get_name();
  return singheat::run_command(name, config, opt, std::cerr);
}
