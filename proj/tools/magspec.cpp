#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "magspec/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectra of the magnetic Smilansky-Solomyak model"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;

  for (const char* name : {"spectrum", "sweep", "landau", "quasimode", "critical-lambda", "existence"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value file or a previous run.json")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides solver.seed")->each([&](const std::string&) {
      seed_given = true;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto command = magspec::parse_command(app.get_subcommands().front()->get_name());
  try {
    magspec::RunConfig config = magspec::RunConfig::load(config_path);
    if (seed_given) config.set("solver.seed", std::to_string(seed));
    magspec::run_command(*command, config, out_dir);
  } catch (const magspec::Error& e) {
    std::cerr << "magspec: " << e.what() << '\n';
    return magspec::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "magspec: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
