// Command-line experiment runner.
//
//   fedunlearn train   --config run.yaml [--set federation.rounds=5] [--seed 7] [--out dir]
//   fedunlearn retrain ...
//   fedunlearn unlearn ...
//   fedunlearn compare ...

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedunlearn/config.hpp"
#include "fedunlearn/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("-c,--config", opts.config_path, "YAML config file (a run MANIFEST works too)");
  cmd->add_option("-s,--set", opts.overrides, "Override a key: section.key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("-o,--out", opts.out, "Output directory");
}

int run(fedunlearn::Scenario scenario, const Options& opts) {
  using namespace fedunlearn;
  ExperimentConfig config;
  try {
    config = opts.config_path.empty() ? parse_config_text("") : parse_config_file(opts.config_path);
    for (const auto& o : opts.overrides) apply_override(config, o);
    if (opts.seed) apply_override(config, "experiment.seed=" + std::to_string(*opts.seed));
    if (!opts.out.empty()) config.out_dir = opts.out;
    config.scenario = scenario;
    finalize_config(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const auto result = run_scenario(config);
  if (result.exit_code == 0) {
    for (const auto& p : result.table) {
      std::cout << p.role << ": clean " << 100.0 * p.clean << "%, backdoor " << 100.0 * p.backdoor << "%\n";
    }
    std::cout << "artifacts in " << config.out_dir.string() << "\n";
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training, client unlearning by projected gradient ascent, and retrain comparison"};
  app.require_subcommand(1);
  Options opts;
  struct Entry {
    const char* name;
    const char* help;
    fedunlearn::Scenario scenario;
  };
  const Entry entries[] = {
      {"train", "Federated training with a backdoored target client", fedunlearn::Scenario::train},
      {"retrain", "Retrain from scratch without the target client", fedunlearn::Scenario::retrain},
      {"unlearn", "Train (or resume), erase the target client, post-train", fedunlearn::Scenario::unlearn},
      {"compare", "Train, unlearn and retrain; write the comparison tables", fedunlearn::Scenario::full_compare},
  };
  int status = 0;
  for (const auto& e : entries) {
    auto* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, opts);
    cmd->callback([&, scenario = e.scenario] { status = run(scenario, opts); });
  }
  CLI11_PARSE(app, argc, argv);
  return status;
}
