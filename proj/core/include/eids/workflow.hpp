#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eids/autoencoder.hpp"
#include "eids/bench.hpp"
#include "eids/bundle.hpp"
#include "eids/config.hpp"
#include "eids/metrics.hpp"

namespace eids {

// Run directory for a config: output.run_dir if set, otherwise a fresh
// <output.dir>/run-<UTC timestamp>-seed<seed>.
std::filesystem::path resolve_run_dir(const RunConfig& cfg);
std::filesystem::path resolve_bundle(const RunConfig& cfg, const std::filesystem::path& run_dir);

// Input rows (CSV or synthetic) with their original traffic-type labels.
Dataset load_dataset(const RunConfig& cfg);
// Stratified on the original labels.
Splits split_dataset(const RunConfig& cfg);
// Relabels every split to Normal/Attack for binary tasks.
Splits task_view(const RunConfig& cfg, const Splits& splits);

struct SynthOutputs {
  std::filesystem::path csv;
  std::filesystem::path catalog;
  std::size_t rows = 0;
};
SynthOutputs cmd_synth(const RunConfig& cfg, const std::filesystem::path& run_dir);

struct TrainOutputs {
  std::filesystem::path bundle_path;
  std::filesystem::path loss_curve;
  std::filesystem::path log;
  ModelBundle bundle;
  AeTrainRecord record;
  std::map<std::string, double> train_seconds;
};

// split -> preprocess fit -> class weights -> autoencoder -> encode ->
// classifiers -> bundle.
TrainOutputs cmd_train(const RunConfig& cfg, const std::filesystem::path& run_dir);

struct ModelEvaluation {
  std::string name;
  ConfusionMatrix confusion;
  MetricsReport report;
};

struct EvaluateOutputs {
  std::filesystem::path metrics;  // deterministic key-value report
  std::filesystem::path summary;  // aligned table with timings
  std::vector<ModelEvaluation> models;
};

EvaluateOutputs cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& bundle_path,
                             const std::filesystem::path& run_dir);

struct BenchOutputs {
  std::filesystem::path report;
  std::filesystem::path json;
  LatencyReport latency;
};

BenchOutputs cmd_bench(const RunConfig& cfg, const std::filesystem::path& bundle_path,
                       const std::filesystem::path& run_dir);

struct PipelineOutputs {
  TrainOutputs train;
  EvaluateOutputs evaluate;
  BenchOutputs bench;
};

PipelineOutputs cmd_pipeline(const RunConfig& cfg, const std::filesystem::path& run_dir);

}  // namespace eids
