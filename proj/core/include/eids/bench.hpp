#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eids/bundle.hpp"
#include "eids/dataset.hpp"

namespace eids {

// End-to-end single-row path: scale raw row -> encode -> classify.
// Holds scratch buffers; use one Detector per thread.
class Detector {
 public:
  Detector(const ModelBundle& bundle, const ClassifierModel& classifier);

  int classify(std::span<const double> raw);
  double score(std::span<const double> raw);

  // Stages exposed separately so the benchmark can time them.
  std::span<const double> transform(std::span<const double> raw);
  std::span<const double> encode(std::span<const double> scaled);
  int predict(std::span<const double> features) const { return classifier_->predict(features); }

 private:
  std::span<const double> features(std::span<const double> raw);

  const ModelBundle* bundle_;
  const ClassifierModel* classifier_;
  RowEncoder encoder_;
  std::vector<double> scaled_;
  std::vector<double> latent_;
};

// Raw rows in the column order the bundle's preprocessor expects, with
// categorical columns encoded through the fitted vocabularies.
Matrix raw_features(const Preprocessor& prep, const Dataset& ds);

struct LatencyReport {
  std::string classifier;
  std::size_t total_instances = 0;  // timed rows over all passes
  std::size_t warmup_instances = 0;
  std::size_t repeats = 0;
  double total_seconds = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double transform_ms = 0.0;  // mean per instance
  double encode_ms = 0.0;
  double classify_ms = 0.0;
  std::vector<std::vector<int>> predictions;  // one vector per pass
};

// Single-threaded, batch-size-1 timing with a monotonic clock. `warmup` rows
// run untimed before the timed passes.
LatencyReport bench_inference(const ModelBundle& bundle, const std::string& classifier, const Matrix& X_raw,
                              std::size_t repeats = 1, std::size_t warmup = 100);

struct ThroughputReport {
  std::size_t rows = 0;
  double seconds = 0.0;
  double rows_per_second = 0.0;
  std::size_t positive_predictions = 0;
};

// Whole-matrix transform and encode, then per-row classification.
ThroughputReport bench_batch(const ModelBundle& bundle, const std::string& classifier, const Matrix& X_raw);

void write_latency(std::ostream& out, const LatencyReport& r);
void write_latency_json(std::ostream& out, const LatencyReport& r);

}  // namespace eids
