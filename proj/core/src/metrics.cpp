#include "eids/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eids {

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::vector<ClassMetrics> one_vs_rest(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.num_classes());
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    auto& m = out[c];
    const auto tp = cm.at(c, c);
    m.support = cm.support(c);
    m.precision = ratio(tp, cm.predicted(c), m.degenerate);
    m.recall = ratio(tp, m.support, m.degenerate);
    m.f1 = harmonic(m.precision, m.recall);
  }
  return out;
}

void aggregate(const ConfusionMatrix& cm, MetricsReport& r) {
  r.per_class = one_vs_rest(cm);
  const double total = static_cast<double>(cm.total());
  std::size_t supported = 0;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    if (m.degenerate) {
      const auto& name = c < cm.class_names().size() ? cm.class_names()[c] : std::to_string(c);
      r.flags.push_back(m.support == 0 ? fmt::format("class '{}' has no support; excluded from macro means", name)
                                       : fmt::format("class '{}' is never predicted; precision set to 0", name));
    }
    if (m.support == 0) continue;
    ++supported;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    const double w = static_cast<double>(m.support) / total;
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
  }
  if (supported > 0) {
    r.macro_precision /= static_cast<double>(supported);
    r.macro_recall /= static_cast<double>(supported);
    r.macro_f1 /= static_cast<double>(supported);
  }
  r.accuracy = static_cast<double>(cm.trace()) / total;
  r.geo_mean = geo_mean(cm);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t k, std::vector<std::string> class_names)
    : k_(k), cells_(k * k, 0), names_(std::move(class_names)) {}

double ConfusionMatrix::percent(std::size_t truth, std::size_t pred) const {
  const auto t = total();
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(at(truth, pred)) / static_cast<double>(t);
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(cells_.begin(), cells_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::support(std::size_t cls) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(cls, j);
  return s;
}

std::uint64_t ConfusionMatrix::predicted(std::size_t cls) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, cls);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, i);
  return s;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes,
                          std::vector<std::string> class_names) {
  if (y_true.size() != y_pred.size()) throw DataError("confusion: label vectors differ in length");
  if (y_true.empty()) throw DataError("confusion: no rows to evaluate");
  ConfusionMatrix cm(num_classes, std::move(class_names));
  const auto k = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= k || y_pred[i] < 0 || y_pred[i] >= k) {
      throw DataError(fmt::format("confusion: row {} has code outside [0, {})", i, k));
    }
    ++cm.at(static_cast<std::size_t>(y_true[i]), static_cast<std::size_t>(y_pred[i]));
  }
  return cm;
}

MetricsReport binary_metrics(const ConfusionMatrix& cm, int positive_class) {
  if (cm.num_classes() != 2) throw DataError("binary_metrics: confusion matrix is not 2x2");
  if (positive_class != 0 && positive_class != 1) throw UsageError("binary_metrics: positive class must be 0 or 1");
  if (cm.total() == 0) throw DataError("binary_metrics: empty confusion matrix");
  const auto pos = static_cast<std::size_t>(positive_class);
  const auto neg = 1 - pos;
  const auto tp = cm.at(pos, pos);
  const auto tn = cm.at(neg, neg);
  const auto fp = cm.at(neg, pos);
  const auto fn = cm.at(pos, neg);

  MetricsReport r;
  aggregate(cm, r);
  bool degenerate = false;
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn);
  r.precision = ratio(tp, tp + fp, degenerate);
  r.recall = ratio(tp, tp + fn, degenerate);
  r.f1 = harmonic(r.precision, r.recall);
  if (degenerate) r.flags.push_back("positive-class precision or recall has a zero denominator");
  return r;
}

MetricsReport multiclass_metrics(const ConfusionMatrix& cm) {
  if (cm.num_classes() < 2) throw DataError("multiclass_metrics: need at least two classes");
  if (cm.total() == 0) throw DataError("multiclass_metrics: empty confusion matrix");
  MetricsReport r;
  aggregate(cm, r);
  r.precision = r.macro_precision;
  r.recall = r.macro_recall;
  r.f1 = r.macro_f1;
  return r;
}

double geo_mean(const ConfusionMatrix& cm) {
  double log_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto s = cm.support(c);
    if (s == 0) continue;
    const auto tp = cm.at(c, c);
    if (tp == 0) return 0.0;
    log_sum += std::log(static_cast<double>(tp) / static_cast<double>(s));
    ++n;
  }
  return n == 0 ? 0.0 : std::exp(log_sum / static_cast<double>(n));
}

double auc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw DataError("auc: labels and scores differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    if (!std::isfinite(scores[order[i]])) throw DataError("auc: non-finite score");
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based average rank of the tie group [i, j).
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1) {
        pos_rank_sum += rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

void write_key_values(std::ostream& out, const std::string& prefix, const MetricsReport& r,
                      const std::vector<std::string>& class_names) {
  auto kv = [&](const std::string& key, double v) { out << fmt::format("{}.{} = {:.6f}\n", prefix, key, v); };
  kv("accuracy", r.accuracy);
  kv("precision", r.precision);
  kv("recall", r.recall);
  kv("f1", r.f1);
  kv("precision_macro", r.macro_precision);
  kv("precision_weighted", r.weighted_precision);
  kv("recall_macro", r.macro_recall);
  kv("recall_weighted", r.weighted_recall);
  kv("f1_macro", r.macro_f1);
  kv("f1_weighted", r.weighted_f1);
  kv("geo_mean", r.geo_mean);
  if (r.auc) kv("auc", *r.auc);
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    const auto name = c < class_names.size() ? class_names[c] : std::to_string(c);
    out << fmt::format("{}.class.{}.precision = {:.6f}\n", prefix, name, m.precision);
    out << fmt::format("{}.class.{}.recall = {:.6f}\n", prefix, name, m.recall);
    out << fmt::format("{}.class.{}.f1 = {:.6f}\n", prefix, name, m.f1);
    out << fmt::format("{}.class.{}.support = {}\n", prefix, name, m.support);
  }
  for (const auto& f : r.flags) out << fmt::format("{}.flag = {}\n", prefix, f);
}

void write_confusion(std::ostream& out, const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  auto name = [&](std::size_t i) { return i < cm.class_names().size() ? cm.class_names()[i] : std::to_string(i); };
  std::vector<std::vector<std::string>> cells(k, std::vector<std::string>(k));
  std::size_t first = std::string("true\\pred").size();
  std::vector<std::size_t> width(k);
  for (std::size_t i = 0; i < k; ++i) {
    first = std::max(first, name(i).size());
    width[i] = name(i).size();
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      cells[i][j] = fmt::format("{} ({:.2f}%)", cm.at(i, j), cm.percent(i, j));
      width[j] = std::max(width[j], cells[i][j].size());
    }
  }
  out << fmt::format("{:<{}}", "true\\pred", first);
  for (std::size_t j = 0; j < k; ++j) out << fmt::format("  {:>{}}", name(j), width[j]);
  out << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    out << fmt::format("{:<{}}", name(i), first);
    for (std::size_t j = 0; j < k; ++j) out << fmt::format("  {:>{}}", cells[i][j], width[j]);
    out << '\n';
  }
}

}  // namespace eids
