// eids: train, evaluate and benchmark the autoencoder-based intrusion
// detection pipeline from the command line.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "eids/config.hpp"
#include "eids/workflow.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// evaluate/bench write next to the bundle unless a run directory is given.
fs::path existing_run_dir(const eids::RunConfig& cfg) {
  if (!cfg.run_dir.empty()) {
    fs::create_directories(cfg.run_dir);
    return cfg.run_dir;
  }
  if (cfg.bundle.empty()) throw eids::UsageError("a bundle path is required (--output.bundle or --output.run_dir)");
  const auto parent = fs::path(cfg.bundle).parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

fs::path existing_bundle(const eids::RunConfig& cfg, const fs::path& run_dir) {
  return eids::resolve_bundle(cfg, run_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoencoder-based intrusion detection for IIoT flow records"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("-c,--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the effective configuration before running");

  std::map<std::string, std::string> overrides;
  for (const auto& key : eids::config_keys()) {
    app.add_option_function<std::string>(
        "--" + key.name, [&overrides, name = key.name](const std::string& v) { overrides[name] = v; }, key.help);
  }

  auto* synth = app.add_subcommand("synth", "generate a synthetic flow dataset and its class catalog");
  auto* train = app.add_subcommand("train", "fit preprocessing, the autoencoder and the classifiers; save a bundle");
  auto* evaluate = app.add_subcommand("evaluate", "score a bundle and write metrics and confusion matrices");
  auto* bench = app.add_subcommand("bench", "time per-instance inference through a bundle");
  auto* pipeline = app.add_subcommand("pipeline", "train, evaluate and bench in one run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    eids::RunConfig cfg = config_path.empty() ? eids::RunConfig{} : eids::RunConfig::load(config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    if (print_config) std::cout << cfg.to_text() << '\n';

    if (synth->parsed()) {
      const auto dir = eids::resolve_run_dir(cfg);
      const auto out = eids::cmd_synth(cfg, dir);
      std::cout << fmt::format("wrote {} rows to {}\nclass catalog: {}\n", out.rows, out.csv.string(),
                               out.catalog.string());
    } else if (train->parsed()) {
      const auto dir = eids::resolve_run_dir(cfg);
      const auto out = eids::cmd_train(cfg, dir);
      std::cout << fmt::format("bundle: {}\nloss curve: {}\nlog: {}\nbest epoch {} of {}, val loss {:.6g}\n",
                               out.bundle_path.string(), out.loss_curve.string(), out.log.string(),
                               out.record.best_epoch, out.record.val_loss.size(), out.record.best_val_loss());
    } else if (evaluate->parsed()) {
      const auto dir = existing_run_dir(cfg);
      const auto out = eids::cmd_evaluate(cfg, existing_bundle(cfg, dir), dir);
      std::ifstream summary(out.summary);
      std::cout << summary.rdbuf() << fmt::format("\nmetrics: {}\n", out.metrics.string());
    } else if (bench->parsed()) {
      const auto dir = existing_run_dir(cfg);
      const auto out = eids::cmd_bench(cfg, existing_bundle(cfg, dir), dir);
      eids::write_latency(std::cout, out.latency);
      std::cout << fmt::format("report: {}\n", out.report.string());
    } else if (pipeline->parsed()) {
      const auto dir = eids::resolve_run_dir(cfg);
      const auto out = eids::cmd_pipeline(cfg, dir);
      std::ifstream summary(out.evaluate.summary);
      std::cout << summary.rdbuf() << '\n';
      eids::write_latency(std::cout, out.bench.latency);
      std::cout << fmt::format("run directory: {}\n", dir.string());
    }
  } catch (const eids::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const eids::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const eids::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
