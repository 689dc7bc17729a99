#include <iostream>

#include "CLI11.hpp"
#include "poreflow/io.hpp"

int main(int argc, char** argv) {
  using poreflow::io::Command;
  CLI::App app{"Dead-end membrane filtration simulator and filter-design optimizer"};
  app.require_subcommand(1);

  poreflow::io::CliOptions opts;
  std::uint64_t seed = 0;
  int threads = 1;

  for (auto cmd : {Command::Simulate, Command::Optimize, Command::Multistage, Command::Sweep, Command::Feasibility}) {
    auto* sub = app.add_subcommand(poreflow::io::to_string(cmd));
    sub->add_option("--config", opts.config, "JSON run configuration")->required();
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", seed, "search seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads for the multistart search")->check(CLI::PositiveNumber);
    sub->add_flag("--emit-profile", opts.emit_profile, "write a(x,t) at t = 0, t_f/2, t_f");
    sub->callback([&opts, cmd] { opts.command = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : poreflow::io::kConfigError;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--threads")) opts.threads = threads;
  }
  return poreflow::io::run_command(opts, std::cerr);
}
