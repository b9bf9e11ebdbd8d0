#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlsg/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::int64_t> iters;
  std::string out;
  std::string strategy;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "override the seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--reps", flags.reps, "override the number of repetitions");
  cmd->add_option("--iters", flags.iters, "override the number of iterations");
}

mlsg::ExperimentConfig build_config(const CommonFlags& flags, const std::string& strategy) {
  nlohmann::json doc = nlohmann::json::object();
  if (!flags.config.empty()) {
    std::ifstream in(flags.config);
    doc = nlohmann::json::parse(in);
  }
  if (!strategy.empty()) doc["strategy"] = strategy;
  if (flags.seed) doc["seed"] = *flags.seed;
  if (flags.reps) doc["repetitions"] = *flags.reps;
  if (flags.iters) doc["iterations"] = *flags.iters;
  if (!flags.out.empty()) doc["output"] = flags.out;
  return mlsg::ExperimentConfig::from_json(doc);
}

int execute(const mlsg::ExperimentConfig& config) {
  const auto result = mlsg::run_experiment(config);
  std::cout << result.csv_path << "\n" << result.summary.dump(2) << "\n";
  if (config.strategy == "validate-rates" && !result.summary.at("pass").get<bool>()) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel stochastic gradient solvers for optimal control under uncertainty"};
  app.require_subcommand(1);

  CommonFlags run_flags, ref_flags, screen_flags, rates_flags;
  auto* run = app.add_subcommand("run", "run mlsg, rmlsg or rm-baseline repetitions");
  add_common(run, run_flags);
  run->add_option("--strategy", run_flags.strategy, "mlsg | rmlsg | rm-baseline (default: config value)")
      ->check(CLI::IsMember({"mlsg", "rmlsg", "rm-baseline"}));
  auto* reference = app.add_subcommand("reference", "compute the quadrature reference control");
  add_common(reference, ref_flags);
  auto* screen = app.add_subcommand("screen", "estimate per-level second moments at u = 0");
  add_common(screen, screen_flags);
  auto* rates = app.add_subcommand("validate-rates", "fit the level decay slope and C(u*)");
  add_common(rates, rates_flags);

  std::vector<std::string> inputs;
  std::string merged;
  auto* plot = app.add_subcommand("plot-data", "merge run CSVs into one long-format CSV");
  plot->add_option("--in", inputs, "run CSV (repeatable)")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", merged, "merged CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = build_config(run_flags, run_flags.strategy);
      if (config.strategy != "mlsg" && config.strategy != "rmlsg" && config.strategy != "rm-baseline")
        throw std::invalid_argument("run needs strategy mlsg, rmlsg or rm-baseline, got '" + config.strategy + "'");
      return execute(config);
    }
    if (*reference) return execute(build_config(ref_flags, "reference"));
    if (*screen) return execute(build_config(screen_flags, "screen"));
    if (*rates) return execute(build_config(rates_flags, "validate-rates"));
    if (*plot) {
      mlsg::merge_plot_data(inputs, merged);
      std::cout << merged << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
