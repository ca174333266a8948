#pragma once

#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "eids/common.hpp"
#include "eids/dataset.hpp"

namespace eids {

struct CorrelatedDrop {
  std::string dropped;
  std::string kept;
  double r = 0.0;

  bool operator==(const CorrelatedDrop&) const = default;
};

struct FilterState {
  std::vector<std::string> original_columns;
  std::vector<std::string> dropped_constant;
  std::vector<CorrelatedDrop> dropped_correlated;
  std::vector<std::string> kept_columns;

  bool operator==(const FilterState&) const = default;
};

struct ScalerState {
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const ScalerState&) const = default;

  double scale(std::size_t j, double v) const { return (v - min[j]) / (max[j] - min[j]); }
  double unscale(std::size_t j, double v) const { return min[j] + v * (max[j] - min[j]); }
};

// Class name <-> code, codes assigned in sorted-name order unless built with
// from_ordered().
class LabelEncoderMap {
 public:
  LabelEncoderMap() = default;

  static LabelEncoderMap fit(std::span<const std::string> names);
  static LabelEncoderMap from_ordered(std::vector<std::string> names);

  int encode(const std::string& name) const;  // throws DataError on unseen
  const std::string& decode(int code) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelEncoderMap&) const = default;

 private:
  std::vector<std::string> names_;
};

// Per-column vocabulary for categorical features, fitted on training data.
// Values not seen during fit encode to the vocabulary size.
struct CategoryEncoder {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> vocab;

  bool operator==(const CategoryEncoder&) const = default;
  bool empty() const { return columns.empty(); }
};

struct ClassWeights {
  std::vector<double> w;

  double operator[](int code) const { return w[static_cast<std::size_t>(code)]; }
  std::size_t size() const { return w.size(); }
};

// Drops zero-variance columns, then for each column pair (i, j), i < j, with
// |pearson r| > threshold drops the later column j.
FilterState fit_filter(const Dataset& train, double corr_threshold = 0.6);

// Min/max of the kept columns. Throws NumericError on a column with max == min.
ScalerState fit_scaler(const Dataset& train_filtered);

CategoryEncoder fit_categories(const Dataset& train);
Dataset encode_categories(const Dataset& ds, const CategoryEncoder& enc);

// Selects the kept columns by name, min-max scales them (no clipping), and
// re-codes labels through `labels`. An empty filter and scaler leave X as is.
Dataset transform(const Dataset& ds, const FilterState& filter, const ScalerState& scaler,
                  const LabelEncoderMap& labels);

// Two-pass Pearson correlation; 0 when either column is constant.
double pearson(std::span<const double> a, std::span<const double> b);

// w_c = N / (K * n_c). Throws DataError if a class in [0, K) has no rows.
ClassWeights class_weights(std::span<const int> y, std::size_t num_classes);

// All fitted preprocessing state needed to replay the transform on new rows.
struct Preprocessor {
  std::vector<std::string> input_columns;  // schema columns the raw rows carry
  CategoryEncoder categories;
  FilterState filter;
  ScalerState scaler;
  LabelEncoderMap labels;
  // Index into input_columns for every kept column, cached from the filter.
  std::vector<std::size_t> kept_index;

  static Preprocessor fit(const Dataset& train, const LabelEncoderMap& labels, double corr_threshold = 0.6);

  Dataset apply(const Dataset& ds) const;
  // Scales one numeric raw row (already category-encoded) into `out`.
  void transform_row(std::span<const double> raw, std::span<double> out) const;
  std::size_t output_width() const { return kept_index.size(); }
  void rebuild_index();

  bool operator==(const Preprocessor&) const = default;
};

}  // namespace eids
