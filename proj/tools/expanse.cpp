#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "expanse/config.hpp"
#include "expanse/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on expansive measures of regular flows"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  app.add_option("command", command, "ball-mass | scan | entropy | bk-curve | cover | regularize-demo | tube-check")
      ->required();
  app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "64-bit seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  expanse::ExperimentConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "invalid config: cannot read " << config_path << '\n';
      return 2;
    }
    cfg = expanse::parse_config(expanse::Json::parse(in));
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  }
  if (!cfg.command.empty() && cfg.command != command)
    std::cerr << "note: command '" << command << "' overrides config command '" << cfg.command << "'\n";
  cfg.command = command;
  if (*out_opt) cfg.output_dir = out_dir;
  if (*seed_opt) cfg.seed = seed;
  expanse::set_default_threads(threads);

  for (const auto& v : expanse::validate(cfg))
    if (v.severity == expanse::Severity::warning) std::cerr << "warning: " << v.field << ": " << v.message << '\n';

  const auto result = expanse::run(cfg);
  if (!result.message.empty()) std::cerr << result.message;
  if (result.exit_code == 0)
    for (const auto& f : result.outputs) std::cout << cfg.output_dir << '/' << f << '\n';
  return result.exit_code;
}
