#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "eids/common.hpp"

namespace eids {

// cell(i, j) counts rows of true class i predicted as class j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  ConfusionMatrix(std::size_t k, std::vector<std::string> class_names = {});

  std::size_t num_classes() const { return k_; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return cells_[truth * k_ + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return cells_[truth * k_ + pred]; }
  // cell / total * 100
  double percent(std::size_t truth, std::size_t pred) const;
  std::uint64_t total() const;
  std::uint64_t support(std::size_t cls) const;    // row sum
  std::uint64_t predicted(std::size_t cls) const;  // column sum
  std::uint64_t trace() const;
  const std::vector<std::string>& class_names() const { return names_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint64_t> cells_;
  std::vector<std::string> names_;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes,
                          std::vector<std::string> class_names = {});

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  // A zero denominator forced one of the rates to 0.
  bool degenerate = false;
};

struct MetricsReport {
  double accuracy = 0.0;
  // Positive-class precision/recall/F1 for binary reports; macro values otherwise.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double geo_mean = 0.0;
  std::optional<double> auc;
  std::vector<ClassMetrics> per_class;
  std::vector<std::string> flags;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

MetricsReport binary_metrics(const ConfusionMatrix& cm, int positive_class = 1);
MetricsReport multiclass_metrics(const ConfusionMatrix& cm);

// Geometric mean of per-class recalls over classes with nonzero support.
double geo_mean(const ConfusionMatrix& cm);

// Mann-Whitney AUC; tied scores count one half.
double auc(std::span<const int> y_true, std::span<const double> scores);

// "prefix.key = value" lines, timing excluded so reports compare byte-for-byte.
void write_key_values(std::ostream& out, const std::string& prefix, const MetricsReport& report,
                      const std::vector<std::string>& class_names);

// Absolute counts with percentages, one row per true class.
void write_confusion(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace eids
