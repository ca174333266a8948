#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eids/common.hpp"

namespace eids {

enum class FeatureKind { kNumeric, kCategorical };

struct RecordSchema {
  std::vector<std::string> feature_names;
  std::vector<FeatureKind> feature_kinds;
  std::string label_column;

  std::size_t width() const { return feature_names.size(); }
  // Throws DataError on duplicate names, a label that is also a feature, or
  // a kinds/names size mismatch.
  void validate() const;
  // Index of a feature by name, or npos.
  std::size_t index_of(const std::string& name) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Feature matrix plus integer labels. `y[i]` indexes `class_names`.
//
// Categorical columns hold an index into `categories[j]`; numeric columns
// have an empty vocabulary.
struct Dataset {
  RecordSchema schema;
  Matrix X;
  std::vector<int> y;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> categories;

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t num_classes() const { return class_names.size(); }

  // Row count per class code.
  std::vector<std::size_t> class_counts() const;
  // Rows selected by index, same schema and class list.
  Dataset subset(std::span<const std::size_t> rows) const;
  // Throws DataError if shapes disagree, labels are out of range or X holds a
  // non-finite value.
  void validate() const;
};

struct ClassCatalog {
  std::vector<std::string> names;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
  std::vector<double> proportions() const;

  // Class distribution of the Edge-IIoTset corpus (15 classes, 1,927,304 rows).
  static ClassCatalog edge_iiotset();
  static ClassCatalog uniform(std::vector<std::string> names);

  // One "name,count" line per class.
  void save(const std::filesystem::path& path) const;
  static ClassCatalog load(const std::filesystem::path& path);
};

struct SynthSpec {
  std::size_t n_rows = 10000;
  std::size_t n_features = 24;
  ClassCatalog classes = ClassCatalog::edge_iiotset();
  // Spread of the cluster centers, in units of noise_sigma.
  double separation = 10.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

// Splits `total` into integer parts proportional to `weights` using the
// largest-remainder method. Ties in the remainder go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights);

// Infers a schema from a CSV header: every column except `label_column` is a
// feature; a column is numeric if all of its cells parse as finite numbers.
RecordSchema infer_schema(const std::filesystem::path& path, const std::string& label_column,
                          std::span<const std::string> drop_columns = {});

Dataset load_csv(const std::filesystem::path& path, const RecordSchema& schema);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

Dataset synth_generate(const SynthSpec& spec);

// "Normal" becomes class 0, every other label class 1 ("Attack").
Dataset to_binary(const Dataset& ds);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Per-class stratified split. Rows keep their original relative order inside
// each split; which rows land where is decided by a seeded shuffle.
Splits stratified_split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

// Order-sensitive 64-bit FNV-1a hash of X and y.
std::uint64_t fingerprint(const Dataset& ds);

inline constexpr const char* kNormalClass = "Normal";
inline constexpr const char* kAttackClass = "Attack";

}  // namespace eids
