// vhl: environment-side adversarial attacks on an instruction-following
// navigation agent. Pipeline stages write their artifacts under --out and
// later stages consume them.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "vhl/config.hpp"
#include "vhl/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vhl - texture attacks on an instruction-guided navigation agent"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = -1;
  long long seed = -1;

  const std::vector<std::string> commands = {"gen-world", "train-agent", "build-attacks",
                                             "attack",    "eval",        "ablate",
                                             "report"};
  const std::vector<std::string> descriptions = {
      "generate synthetic worlds and episodes",
      "behavior-clone the navigation policy and check the competence gate",
      "select attack viewpoints, objects and supporting episodes",
      "optimize attack textures per instance",
      "evaluate attacked vs unattacked environments",
      "sweep attack hyperparameters one at a time",
      "aggregate delta tables from eval outputs",
  };
  for (size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
    sub->add_option("--config", config_path, "config file (key = value under [section] headers)");
    sub->add_option("--out", out_dir, "output directory (default from config)");
    sub->add_option("--workers", workers, "worker threads for independent instances");
    sub->add_option("--seed", seed, "override run.seed");
  }

  CLI11_PARSE(app, argc, argv);

  vhl::RunConfig config;
  try {
    if (!config_path.empty()) {
      config = vhl::parse_config_file(config_path);
    }
    vhl::apply_env_overrides(config);
    if (!out_dir.empty()) config.out = out_dir;
    if (workers > 0) config.workers = workers;
    if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  return vhl::run_command(app.get_subcommands().front()->get_name(), config);
}
