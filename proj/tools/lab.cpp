#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lab/lab.hpp"

int main(int argc, char** argv) {
  CLI::App app{"extension-theory laboratory for flat model geometries"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run_cmd = app.add_subcommand("run", "run the experiments in a config file");
  run_cmd->add_option("config", config_path, "path to the experiment config")->required();

  CLI::App* list_cmd = app.add_subcommand("list", "list available experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are validation failures
  }

  if (list_cmd->parsed()) {
    std::cout << lab::list_experiments();
    return 0;
  }
  return lab::run(config_path);
}
