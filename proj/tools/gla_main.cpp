#include <iostream>

#include "CLI11.hpp"
#include "gla/commands.hpp"

int main(int argc, char** argv) {
  using namespace gla::cli;
  CLI::App app{"Gaussian-guided feature alignment experiments"};
  app.require_subcommand(1, 1);

  std::string config, seed, out;
  std::size_t jobs = 0;
  for (const char* name : {"synthetic", "adapt", "ablation", "gradcheck", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run seed (overrides GLA_SEED and the config)");
    sub->add_option("--out", out, "output directory (run directory for report)");
    sub->add_option("--jobs", jobs, "parallel independent runs (ablation)")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  Invocation inv;
  try {
    inv.command = command_from_name(app.get_subcommands().front()->get_name());
    if (!config.empty()) inv.config_file = config;
    if (!seed.empty()) inv.overrides.seed = parse_seed(seed, "--seed");
  } catch (const ConfigError& e) {
    std::cerr << "gla: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!out.empty()) inv.overrides.out = out;
  if (jobs > 0) inv.overrides.jobs = jobs;
  return run(inv, std::cout, std::cerr);
}
