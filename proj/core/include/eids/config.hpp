#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "eids/autoencoder.hpp"
#include "eids/classifiers.hpp"
#include "eids/dataset.hpp"

namespace eids {

enum class Task { kBinary, kMulticlass };

// Every knob of a run. Serialized as "key = value" lines with dotted
// sections; '#' starts a comment.
struct RunConfig {
  // input
  std::string input_csv;  // empty: synthesize
  std::string label_column = "Attack_type";
  std::vector<std::string> drop_columns;
  // synthetic data
  std::size_t synth_rows = 10000;
  std::size_t synth_features = 24;
  double synth_separation = 10.0;
  double synth_noise = 0.1;
  std::string synth_catalog;  // empty: Edge-IIoTset class distribution
  // output
  std::string output_dir = "runs";
  std::string run_dir;  // empty: <output_dir>/run-<timestamp>-seed<seed>
  std::string bundle;   // empty: <run_dir>/model.eids
  // experiment
  Task task = Task::kMulticlass;
  std::uint64_t seed = 42;
  SplitRatios split;
  double corr_threshold = 0.6;
  // autoencoder
  std::vector<int> ae_hidden{16};
  int ae_bottleneck = 6;
  Activation ae_activation = Activation::kSigmoid;
  // ae.seed is overridden by `seed`. 100 epochs leaves the default synthetic
  // set underfit on some seeds.
  TrainConfig ae{.max_epochs = 200};
  bool pretrain_normal_only = false;
  // classifiers
  std::vector<std::string> classifiers;  // empty: dt+gbdt (binary) or dt+lda (multiclass)
  FeatureSpace classifier_features = FeatureSpace::kLatent;
  DtParams dt;
  double lda_ridge = 1e-6;
  GbdtParams gbdt;
  // evaluation and benchmark
  std::string evaluate_split = "test";
  std::string bench_classifier = "dt";
  std::string bench_split = "test";
  std::size_t bench_repeats = 1;
  std::size_t bench_warmup = 100;

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Sets one key from its textual value; throws UsageError on unknown keys
  // or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  std::vector<std::string> resolved_classifiers() const;
  SynthSpec synth_spec() const;
  TrainConfig train_config() const;
  AeArchitecture architecture(int input_width) const;

  bool operator==(const RunConfig&) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// All keys in serialization order.
const std::vector<ConfigKey>& config_keys();

std::string to_string(Task t);

}  // namespace eids
