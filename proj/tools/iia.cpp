#include <iostream>

#include <CLI11.hpp>

#include "iia/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Type IIA flow laboratory on flat 6-tori"};
  app.require_subcommand(1);

  iia::cli::RunConfig config;
  std::string manifest;
  std::string out = "iia-out";
  int grid_n = 0;

  for (const char* name : {"check", "flow-run", "linearize", "perturb-and-flow", "decay-report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--manifest", manifest, "experiment manifest (sections of key = value)");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--seed", config.seed, "seed recorded in every output")->capture_default_str();
    sub->add_option("--grid-n", grid_n, "replace the size of every resolved grid axis")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : iia::cli::kConfigError;
  }

  try {
    config.command = iia::cli::parse_command(app.get_subcommands().front()->get_name());
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return iia::cli::kConfigError;
  }
  if (!manifest.empty()) config.manifest = manifest;
  config.out = out;
  if (grid_n > 0) config.grid_n = grid_n;
  return iia::cli::run(config, std::cout);
}
