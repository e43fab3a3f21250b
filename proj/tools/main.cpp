// qelab: run, validate and report experiment configs.
#include <iostream>

#include "CLI11.hpp"
#include "qelab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qelab - quantum ergodicity experiments on graphs and trees"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  int threads = 1;

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a key: section.key=value (repeatable)");
  run->add_option("-o,--output", output, "Output directory (default: from config or $QELAB_OUTPUT_ROOT)");
  run->add_option("-j,--threads", threads, "Worker threads for sweep cells")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  validate->add_option("--set", overrides, "Override a key: section.key=value (repeatable)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Aggregate finished runs below a directory");
  report->add_option("dir", report_dir, "Directory holding run outputs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = qelab::load_config(config, overrides);
      qelab::RunOptions opts;
      opts.output = output;
      opts.threads = threads;
      const auto result = qelab::run_experiment(cfg, opts);
      std::cout << result.directory.string() << '\n';
    } else if (*validate) {
      const auto cfg = qelab::load_config(config, overrides);
      qelab::validate_config(cfg);
      std::cout << "ok " << cfg.experiment() << ' ' << cfg.hash() << '\n';
    } else {
      const auto result = qelab::report(report_dir);
      for (const auto& p : result.aggregates) std::cout << p.string() << '\n';
    }
  } catch (const qelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
