// Experiment runner. Every subcommand takes --config (JSON), --seed, and
// --out-dir; results land in out-dir together with a manifest that can
// reproduce them bit for bit.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adados/config.hpp"
#include "adados/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--out-dir", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "master seed (defaults to the config's first seed)")
      ->each([&args](const std::string&) { args.seed_given = true; });
}

adados::config::ExperimentConfig resolve_config(const CommonArgs& args) {
  if (args.config_path.empty()) {
    auto c = adados::config::scenario_preset("simple");
    c.validate();
    return c;
  }
  return adados::config::load_config(args.config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive low-rate DoS attack laboratory"};
  app.require_subcommand(1);

  const char* names[] = {"gen-trace",     "train-detector", "baseline",
                         "train-teacher", "train-student",  "detector-matrix",
                         "noise-sweep",   "eval"};
  const char* descriptions[] = {
      "emit a synthetic background-traffic trace",
      "build a labelled corpus and train a detector",
      "run the periodic-schedule grid against a trained detector",
      "train the full-observation attacker with PPO",
      "train the delay-only student against a teacher checkpoint",
      "train attackers against ldos/adados/mixed detectors",
      "evaluate one checkpoint across an observation-noise grid",
      "evaluate a checkpoint over seeds and episodes"};

  CommonArgs args;
  for (std::size_t i = 0; i < 8; ++i) {
    add_common(app.add_subcommand(names[i], descriptions[i]), args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();

  try {
    auto config = resolve_config(args);
    const std::uint64_t seed = args.seed_given ? args.seed : config.seeds.front();

    using Driver = std::vector<std::string> (*)(const adados::config::ExperimentConfig&,
                                                std::uint64_t, const std::string&);
    Driver driver = nullptr;
    if (command == "gen-trace") driver = adados::exp::cmd_gen_trace;
    if (command == "train-detector") driver = adados::exp::cmd_train_detector;
    if (command == "baseline") driver = adados::exp::cmd_baseline;
    if (command == "train-teacher") driver = adados::exp::cmd_train_teacher;
    if (command == "train-student") driver = adados::exp::cmd_train_student;
    if (command == "detector-matrix") driver = adados::exp::cmd_detector_matrix;
    if (command == "noise-sweep") driver = adados::exp::cmd_noise_sweep;
    if (command == "eval") driver = adados::exp::cmd_eval;

    const auto outputs = driver(config, seed, args.out_dir);
    for (const auto& path : outputs) std::cout << path << '\n';
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    err["command"] = command;
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
