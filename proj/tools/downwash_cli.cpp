// downwash: generate datasets, train the aggregation models, evaluate and
// report.
//
//   downwash gen    [--config F] [--set s.k=v]... [--out DIR] [--seed N]
//   downwash train  [...] [--datasets DIR]
//   downwash eval   [...] [MODEL_FILE...]
//   downwash report [...]
//
// Exit codes: 0 ok, 1 usage, 2 config error, 3 I/O error, 4 divergence.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "downwash/pipeline.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kIo = 3, kDivergence = 4 };

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string dataset_dir;
  std::vector<std::string> models;
};

downwash::RunConfig resolve(const Options& o) {
  downwash::RunConfig cfg;
  if (!o.config.empty()) cfg = downwash::load_config(o.config);
  for (const auto& s : o.overrides) downwash::apply_override(cfg, s);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed_given) cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a key, section.key=value (repeatable)");
  cmd->add_option("--out", o.out, "Output directory (overrides run.out)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](std::uint64_t s) { o.seed = s, o.seed_given = true; }, "Global seed (overrides run.seed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Downwash aggregate-force simulator and benchmark"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "Generate the configured sweep datasets");
  auto* train = app.add_subcommand("train", "Fit the naive grid and train the learnt models");
  auto* eval = app.add_subcommand("eval", "Benchmark models against the ground-truth oracle");
  auto* report = app.add_subcommand("report", "Render the error table from an eval run");
  for (auto* c : {gen, train, eval, report}) add_common(c, o);
  train->add_option("--datasets", o.dataset_dir, "Dataset directory (default <out>/datasets)");
  eval->add_option("models", o.models, "Model files (default: the three trained models)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = resolve(o);
    if (gen->parsed()) {
      downwash::run_gen(cfg, &std::cerr);
    } else if (train->parsed()) {
      downwash::run_train(cfg, &std::cerr, o.dataset_dir);
    } else if (eval->parsed()) {
      std::vector<std::filesystem::path> files(o.models.begin(), o.models.end());
      downwash::run_eval(cfg, &std::cerr, files);
    } else if (report->parsed()) {
      std::cout << downwash::run_report(cfg);
    }
  } catch (const downwash::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const downwash::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const downwash::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
