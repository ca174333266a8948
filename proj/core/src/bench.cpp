#include "eids/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

namespace eids {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::span<const double> row_span(const Matrix& X, Eigen::Index i) {
  return {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
}

void check_input(const ModelBundle& bundle, const Matrix& X) {
  if (X.rows() == 0) throw DataError("bench: no rows to time");
  if (static_cast<std::size_t>(X.cols()) != bundle.preprocessor.input_columns.size()) {
    throw DataError(fmt::format("bench: input has {} columns, bundle expects {}", X.cols(),
                                bundle.preprocessor.input_columns.size()));
  }
}

}  // namespace

Detector::Detector(const ModelBundle& bundle, const ClassifierModel& classifier)
    : bundle_(&bundle),
      classifier_(&classifier),
      encoder_(bundle.autoencoder),
      scaled_(bundle.preprocessor.output_width()),
      latent_(encoder_.latent_width()) {}

std::span<const double> Detector::transform(std::span<const double> raw) {
  bundle_->preprocessor.transform_row(raw, scaled_);
  return scaled_;
}

std::span<const double> Detector::encode(std::span<const double> scaled) {
  encoder_.encode(scaled, latent_);
  return latent_;
}

std::span<const double> Detector::features(std::span<const double> raw) {
  const auto scaled = transform(raw);
  return classifier_->input == FeatureSpace::kLatent ? encode(scaled) : scaled;
}

int Detector::classify(std::span<const double> raw) { return classifier_->predict(features(raw)); }

double Detector::score(std::span<const double> raw) { return classifier_->score(features(raw)); }

Matrix raw_features(const Preprocessor& prep, const Dataset& ds) {
  const Dataset numeric = encode_categories(ds, prep.categories);
  Matrix X(numeric.X.rows(), static_cast<Eigen::Index>(prep.input_columns.size()));
  for (std::size_t k = 0; k < prep.input_columns.size(); ++k) {
    const auto j = numeric.schema.index_of(prep.input_columns[k]);
    if (j == RecordSchema::npos) throw DataError(fmt::format("missing column '{}'", prep.input_columns[k]));
    X.col(static_cast<Eigen::Index>(k)) = numeric.X.col(static_cast<Eigen::Index>(j));
  }
  return X;
}

LatencyReport bench_inference(const ModelBundle& bundle, const std::string& classifier, const Matrix& X_raw,
                              std::size_t repeats, std::size_t warmup) {
  if (repeats == 0) throw UsageError("bench: repeats must be at least 1");
  check_input(bundle, X_raw);
  const auto& clf = bundle.classifier(classifier);
  Detector det(bundle, clf);
  const bool latent = clf.input == FeatureSpace::kLatent;

  LatencyReport r;
  r.classifier = classifier;
  r.repeats = repeats;
  r.warmup_instances = warmup;

  volatile int sink = 0;
  for (std::size_t i = 0; i < warmup; ++i) {
    sink = det.classify(row_span(X_raw, static_cast<Eigen::Index>(i) % X_raw.rows()));
  }
  static_cast<void>(sink);

  const auto n = static_cast<std::size_t>(X_raw.rows());
  std::vector<double> per_instance;
  per_instance.reserve(n * repeats);
  double transform_total = 0.0, encode_total = 0.0, classify_total = 0.0;
  for (std::size_t pass = 0; pass < repeats; ++pass) {
    std::vector<int> preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto raw = row_span(X_raw, static_cast<Eigen::Index>(i));
      const auto t0 = Clock::now();
      auto features = det.transform(raw);
      const auto t1 = Clock::now();
      if (latent) features = det.encode(features);
      const auto t2 = Clock::now();
      preds[i] = det.predict(features);
      const auto t3 = Clock::now();
      transform_total += ms_between(t0, t1);
      encode_total += ms_between(t1, t2);
      classify_total += ms_between(t2, t3);
      per_instance.push_back(ms_between(t0, t3));
    }
    r.predictions.push_back(std::move(preds));
  }
  r.total_instances = per_instance.size();
  double total_ms = 0.0;
  for (double v : per_instance) total_ms += v;
  r.total_seconds = total_ms / 1000.0;
  const auto count = static_cast<double>(r.total_instances);
  r.mean_ms = total_ms / count;
  r.transform_ms = transform_total / count;
  r.encode_ms = encode_total / count;
  r.classify_ms = classify_total / count;
  std::sort(per_instance.begin(), per_instance.end());
  auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * count)) - 1;
    return per_instance[std::min(idx, per_instance.size() - 1)];
  };
  r.median_ms = quantile(0.5);
  r.p99_ms = quantile(0.99);
  return r;
}

ThroughputReport bench_batch(const ModelBundle& bundle, const std::string& classifier, const Matrix& X_raw) {
  check_input(bundle, X_raw);
  const auto& clf = bundle.classifier(classifier);
  const auto& prep = bundle.preprocessor;
  const auto t0 = Clock::now();
  Matrix scaled(X_raw.rows(), static_cast<Eigen::Index>(prep.output_width()));
  for (Eigen::Index i = 0; i < X_raw.rows(); ++i) {
    prep.transform_row(row_span(X_raw, i), {scaled.data() + i * scaled.cols(), static_cast<std::size_t>(scaled.cols())});
  }
  const Matrix features = clf.input == FeatureSpace::kLatent ? encode(bundle.autoencoder, scaled) : scaled;
  std::size_t positives = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) positives += clf.predict(row_span(features, i)) > 0 ? 1 : 0;
  const auto t1 = Clock::now();
  ThroughputReport r;
  r.rows = static_cast<std::size_t>(X_raw.rows());
  r.positive_predictions = positives;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  r.rows_per_second = r.seconds > 0.0 ? static_cast<double>(r.rows) / r.seconds : 0.0;
  return r;
}

void write_latency(std::ostream& out, const LatencyReport& r) {
  out << fmt::format("classifier = {}\n", r.classifier);
  out << fmt::format("total_instances = {}\n", r.total_instances);
  out << fmt::format("warmup_instances = {}\n", r.warmup_instances);
  out << fmt::format("repeats = {}\n", r.repeats);
  out << fmt::format("total_seconds = {:.6f}\n", r.total_seconds);
  out << fmt::format("mean_ms = {:.6f}\n", r.mean_ms);
  out << fmt::format("median_ms = {:.6f}\n", r.median_ms);
  out << fmt::format("p99_ms = {:.6f}\n", r.p99_ms);
  out << fmt::format("transform_ms = {:.6f}\n", r.transform_ms);
  out << fmt::format("encode_ms = {:.6f}\n", r.encode_ms);
  out << fmt::format("classify_ms = {:.6f}\n", r.classify_ms);
}

void write_latency_json(std::ostream& out, const LatencyReport& r) {
  nlohmann::json j{{"classifier", r.classifier},
                   {"total_instances", r.total_instances},
                   {"warmup_instances", r.warmup_instances},
                   {"repeats", r.repeats},
                   {"total_seconds", r.total_seconds},
                   {"mean_ms", r.mean_ms},
                   {"median_ms", r.median_ms},
                   {"p99_ms", r.p99_ms},
                   {"breakdown_ms", {{"transform", r.transform_ms}, {"encode", r.encode_ms}, {"classify", r.classify_ms}}}};
  out << j.dump(2) << '\n';
}

}  // namespace eids
