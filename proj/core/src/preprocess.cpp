#include "eids/preprocess.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace eids {

LabelEncoderMap LabelEncoderMap::fit(std::span<const std::string> names) {
  LabelEncoderMap m;
  m.names_.assign(names.begin(), names.end());
  std::sort(m.names_.begin(), m.names_.end());
  m.names_.erase(std::unique(m.names_.begin(), m.names_.end()), m.names_.end());
  return m;
}

LabelEncoderMap LabelEncoderMap::from_ordered(std::vector<std::string> names) {
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("label encoder: duplicate class name");
  }
  LabelEncoderMap m;
  m.names_ = std::move(names);
  return m;
}

int LabelEncoderMap::encode(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DataError(fmt::format("unseen label '{}'", name));
  return static_cast<int>(it - names_.begin());
}

const std::string& LabelEncoderMap::decode(int code) const {
  if (code < 0 || static_cast<std::size_t>(code) >= names_.size()) {
    throw DataError(fmt::format("label code {} out of range", code));
  }
  return names_[static_cast<std::size_t>(code)];
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

FilterState fit_filter(const Dataset& train, double corr_threshold) {
  if (train.rows() == 0) throw DataError("fit_filter: empty training set");
  FilterState st;
  st.original_columns = train.schema.feature_names;

  // Column-major copies so pearson() sees contiguous data.
  std::vector<std::vector<double>> cols;
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    const auto col = train.X.col(static_cast<Eigen::Index>(j));
    if (col.maxCoeff() == col.minCoeff()) {
      st.dropped_constant.push_back(train.schema.feature_names[j]);
      continue;
    }
    candidates.push_back(j);
    cols.emplace_back(col.begin(), col.end());
  }

  std::vector<bool> dropped(candidates.size(), false);
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    for (std::size_t b = a + 1; b < candidates.size(); ++b) {
      if (dropped[b]) continue;
      const double r = pearson(cols[a], cols[b]);
      if (std::abs(r) > corr_threshold) {
        dropped[b] = true;
        st.dropped_correlated.push_back({train.schema.feature_names[candidates[b]],
                                         train.schema.feature_names[candidates[a]], r});
      }
    }
  }
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    if (!dropped[a]) st.kept_columns.push_back(train.schema.feature_names[candidates[a]]);
  }
  return st;
}

ScalerState fit_scaler(const Dataset& train) {
  if (train.rows() == 0) throw DataError("fit_scaler: empty training set");
  ScalerState st;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    const auto col = train.X.col(static_cast<Eigen::Index>(j));
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (!(hi > lo)) {
      throw NumericError(fmt::format("fit_scaler: column '{}' is constant; run the filter first",
                                     train.schema.feature_names[j]));
    }
    st.min.push_back(lo);
    st.max.push_back(hi);
  }
  return st;
}

CategoryEncoder fit_categories(const Dataset& train) {
  CategoryEncoder enc;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    if (train.schema.feature_kinds[j] != FeatureKind::kCategorical) continue;
    enc.columns.push_back(train.schema.feature_names[j]);
    auto v = train.categories[j];
    std::sort(v.begin(), v.end());
    enc.vocab.push_back(std::move(v));
  }
  return enc;
}

Dataset encode_categories(const Dataset& ds, const CategoryEncoder& enc) {
  Dataset out = ds;
  for (std::size_t k = 0; k < enc.columns.size(); ++k) {
    const std::size_t j = ds.schema.index_of(enc.columns[k]);
    if (j == RecordSchema::npos) throw DataError(fmt::format("missing column '{}'", enc.columns[k]));
    const auto& vocab = enc.vocab[k];
    std::vector<double> remap;
    for (const auto& value : ds.categories[j]) {
      const auto it = std::lower_bound(vocab.begin(), vocab.end(), value);
      remap.push_back(it != vocab.end() && *it == value ? static_cast<double>(it - vocab.begin())
                                                        : static_cast<double>(vocab.size()));
    }
    auto col = out.X.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = remap[static_cast<std::size_t>(col(i))];
    out.schema.feature_kinds[j] = FeatureKind::kNumeric;
    out.categories[j].clear();
  }
  return out;
}

Dataset transform(const Dataset& ds, const FilterState& filter, const ScalerState& scaler,
                  const LabelEncoderMap& labels) {
  const bool identity_filter = filter.kept_columns.empty() && filter.original_columns.empty();
  std::vector<std::size_t> idx;
  if (identity_filter) {
    for (std::size_t j = 0; j < ds.cols(); ++j) idx.push_back(j);
  } else {
    for (const auto& name : filter.kept_columns) {
      const std::size_t j = ds.schema.index_of(name);
      if (j == RecordSchema::npos) throw DataError(fmt::format("transform: missing column '{}'", name));
      idx.push_back(j);
    }
    if (idx.empty()) throw DataError("transform: the filter left no columns");
  }
  const bool scale = !scaler.min.empty();
  if (scale && scaler.min.size() != idx.size()) {
    throw DataError(fmt::format("transform: scaler has {} columns, filter keeps {}", scaler.min.size(), idx.size()));
  }

  Dataset out;
  out.X.resize(ds.X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t j = idx[k];
    out.schema.feature_names.push_back(ds.schema.feature_names[j]);
    out.schema.feature_kinds.push_back(ds.schema.feature_kinds[j]);
    out.categories.push_back(ds.categories.empty() ? std::vector<std::string>{} : ds.categories[j]);
    auto dst = out.X.col(static_cast<Eigen::Index>(k));
    const auto src = ds.X.col(static_cast<Eigen::Index>(j));
    if (scale) {
      const double lo = scaler.min[k];
      const double range = scaler.max[k] - scaler.min[k];
      dst = (src.array() - lo) / range;
    } else {
      dst = src;
    }
  }
  out.schema.label_column = ds.schema.label_column;

  if (labels.size() == 0) {
    out.class_names = ds.class_names;
    out.y = ds.y;
  } else {
    // Only classes that occur in these rows must be known to the encoder.
    const auto counts = ds.class_counts();
    std::vector<int> remap(ds.class_names.size(), -1);
    for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
      if (counts[c] > 0) remap[c] = labels.encode(ds.class_names[c]);
    }
    out.class_names = labels.names();
    out.y.reserve(ds.y.size());
    for (int c : ds.y) out.y.push_back(remap[static_cast<std::size_t>(c)]);
  }
  return out;
}

ClassWeights class_weights(std::span<const int> y, std::size_t num_classes) {
  if (num_classes == 0) throw DataError("class_weights: no classes");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int c : y) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw DataError(fmt::format("class_weights: label {} outside [0, {})", c, num_classes));
    }
    ++counts[static_cast<std::size_t>(c)];
  }
  ClassWeights cw;
  const double n = static_cast<double>(y.size());
  const double k = static_cast<double>(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw DataError(fmt::format("class_weights: class {} has no rows", c));
    cw.w.push_back(n / (k * static_cast<double>(counts[c])));
  }
  return cw;
}

Preprocessor Preprocessor::fit(const Dataset& train, const LabelEncoderMap& labels, double corr_threshold) {
  Preprocessor p;
  p.input_columns = train.schema.feature_names;
  p.categories = fit_categories(train);
  const Dataset numeric = encode_categories(train, p.categories);
  p.filter = fit_filter(numeric, corr_threshold);
  if (p.filter.kept_columns.empty()) throw DataError("preprocess: every column was dropped by the filter");
  const Dataset filtered = transform(numeric, p.filter, ScalerState{}, LabelEncoderMap{});
  p.scaler = fit_scaler(filtered);
  p.labels = labels;
  p.rebuild_index();
  return p;
}

void Preprocessor::rebuild_index() {
  kept_index.clear();
  for (const auto& name : filter.kept_columns) {
    const auto it = std::find(input_columns.begin(), input_columns.end(), name);
    if (it == input_columns.end()) throw DataError(fmt::format("preprocessor: kept column '{}' is not an input", name));
    kept_index.push_back(static_cast<std::size_t>(it - input_columns.begin()));
  }
}

Dataset Preprocessor::apply(const Dataset& ds) const {
  return transform(encode_categories(ds, categories), filter, scaler, labels);
}

void Preprocessor::transform_row(std::span<const double> raw, std::span<double> out) const {
  for (std::size_t k = 0; k < kept_index.size(); ++k) out[k] = scaler.scale(k, raw[kept_index[k]]);
}

}  // namespace eids
