#include "eids/classifiers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace eids {

namespace {

using SampleLists = std::vector<std::vector<std::uint32_t>>;

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

// Presorted CART builder shared by the classification and regression trees.
// Each node owns one index list per feature, sorted by that feature's value.
class TreeBuilder {
 public:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // lower is better
  };

  TreeBuilder(const Matrix& X, std::size_t max_depth, std::size_t min_samples_split)
      : X_(X), max_depth_(max_depth), min_split_(min_samples_split),
        goes_left_(static_cast<std::size_t>(X.rows()), 0) {}
  virtual ~TreeBuilder() = default;

  std::vector<TreeNode> build() {
    SampleLists lists(static_cast<std::size_t>(X_.cols()));
    for (std::size_t f = 0; f < lists.size(); ++f) {
      auto& l = lists[f];
      l.resize(static_cast<std::size_t>(X_.rows()));
      std::iota(l.begin(), l.end(), 0u);
      const auto col = X_.col(static_cast<Eigen::Index>(f));
      std::stable_sort(l.begin(), l.end(), [&](std::uint32_t a, std::uint32_t b) { return col(a) < col(b); });
    }
    if (lists.empty()) {
      lists.emplace_back(static_cast<std::size_t>(X_.rows()));
      std::iota(lists[0].begin(), lists[0].end(), 0u);
      nodes_.push_back(make_leaf(lists[0]));
      return std::move(nodes_);
    }
    grow(std::move(lists), 0);
    return std::move(nodes_);
  }

  Split find_split(const SampleLists& lists) {
    Split best;
    const double eps = tolerance(lists[0]);
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto& l = lists[f];
      const auto col = X_.col(static_cast<Eigen::Index>(f));
      begin_sweep(l);
      for (std::size_t i = 0; i + 1 < l.size(); ++i) {
        move_left(l[i]);
        const double a = col(l[i]);
        const double b = col(l[i + 1]);
        if (!(a < b)) continue;
        const double s = split_score(i + 1, l.size() - i - 1);
        if (best.feature < 0 || s < best.score - eps) {
          best = {static_cast<int>(f), midpoint(a, b), s};
        }
      }
    }
    return best;
  }

 protected:
  virtual bool is_pure(const std::vector<std::uint32_t>& rows) = 0;
  virtual TreeNode make_leaf(const std::vector<std::uint32_t>& rows) = 0;
  virtual double tolerance(const std::vector<std::uint32_t>& rows) = 0;
  virtual void begin_sweep(const std::vector<std::uint32_t>& rows) = 0;
  virtual void move_left(std::uint32_t row) = 0;
  virtual double split_score(std::size_t n_left, std::size_t n_right) = 0;

 private:
  int grow(SampleLists lists, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    const auto& rows = lists[0];
    if (depth >= max_depth_ || rows.size() < min_split_ || is_pure(rows)) {
      nodes_.push_back(make_leaf(rows));
      return id;
    }
    const Split split = find_split(lists);
    if (split.feature < 0) {
      nodes_.push_back(make_leaf(rows));
      return id;
    }
    TreeNode node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    // Internal nodes keep their histogram/value for inspection.
    const TreeNode summary = make_leaf(rows);
    node.histogram = summary.histogram;
    node.label = summary.label;
    node.value = summary.value;
    nodes_.push_back(std::move(node));

    const auto col = X_.col(split.feature);
    for (auto r : rows) goes_left_[r] = col(r) <= split.threshold ? 1 : 0;
    SampleLists left(lists.size()), right(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      for (auto r : lists[f]) (goes_left_[r] ? left[f] : right[f]).push_back(r);
      std::vector<std::uint32_t>().swap(lists[f]);
    }
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

 protected:
  const Matrix& X_;

 private:
  std::size_t max_depth_;
  std::size_t min_split_;
  std::vector<char> goes_left_;
  std::vector<TreeNode> nodes_;
};

class GiniBuilder : public TreeBuilder {
 public:
  GiniBuilder(const Matrix& X, std::span<const int> y, std::size_t k, const DtParams& p)
      : TreeBuilder(X, p.max_depth, p.min_samples_split), y_(y), k_(k), left_(k), right_(k) {}

 protected:
  bool is_pure(const std::vector<std::uint32_t>& rows) override {
    const int first = y_[rows[0]];
    return std::all_of(rows.begin(), rows.end(), [&](std::uint32_t r) { return y_[r] == first; });
  }

  TreeNode make_leaf(const std::vector<std::uint32_t>& rows) override {
    TreeNode leaf;
    leaf.histogram.assign(k_, 0);
    for (auto r : rows) ++leaf.histogram[static_cast<std::size_t>(y_[r])];
    leaf.label = static_cast<int>(std::max_element(leaf.histogram.begin(), leaf.histogram.end()) - leaf.histogram.begin());
    return leaf;
  }

  double tolerance(const std::vector<std::uint32_t>&) override { return 1e-12; }

  void begin_sweep(const std::vector<std::uint32_t>& rows) override {
    std::fill(left_.begin(), left_.end(), 0);
    std::fill(right_.begin(), right_.end(), 0);
    for (auto r : rows) ++right_[static_cast<std::size_t>(y_[r])];
    n_ = rows.size();
    sq_left_ = 0.0;
    sq_right_ = 0.0;
    for (auto c : right_) sq_right_ += static_cast<double>(c) * static_cast<double>(c);
  }

  void move_left(std::uint32_t row) override {
    const auto c = static_cast<std::size_t>(y_[row]);
    sq_left_ += 2.0 * static_cast<double>(left_[c]) + 1.0;
    sq_right_ -= 2.0 * static_cast<double>(right_[c]) - 1.0;
    ++left_[c];
    --right_[c];
  }

  // Size-weighted child Gini divided by n: (n - sum cL^2/nL - sum cR^2/nR) / n.
  double split_score(std::size_t nl, std::size_t nr) override {
    const double n = static_cast<double>(n_);
    return (n - sq_left_ / static_cast<double>(nl) - sq_right_ / static_cast<double>(nr)) / n;
  }

 private:
  std::span<const int> y_;
  std::size_t k_;
  std::vector<std::size_t> left_, right_;
  std::size_t n_ = 0;
  double sq_left_ = 0.0, sq_right_ = 0.0;
};

class VarianceBuilder final : public TreeBuilder {
 public:
  using LeafValue = std::function<double(const std::vector<std::uint32_t>&)>;

  VarianceBuilder(const Matrix& X, std::span<const double> target, std::size_t max_depth, LeafValue leaf_value)
      : TreeBuilder(X, max_depth, 2), t_(target), leaf_value_(std::move(leaf_value)) {}

 protected:
  bool is_pure(const std::vector<std::uint32_t>& rows) override {
    const double first = t_[rows[0]];
    return std::all_of(rows.begin(), rows.end(), [&](std::uint32_t r) { return t_[r] == first; });
  }

  TreeNode make_leaf(const std::vector<std::uint32_t>& rows) override {
    TreeNode leaf;
    leaf.value = leaf_value_(rows);
    return leaf;
  }

  double tolerance(const std::vector<std::uint32_t>& rows) override {
    double sq = 0.0;
    for (auto r : rows) sq += t_[r] * t_[r];
    return 1e-12 * (1.0 + sq);
  }

  void begin_sweep(const std::vector<std::uint32_t>& rows) override {
    sum_left_ = 0.0;
    sum_right_ = 0.0;
    for (auto r : rows) sum_right_ += t_[r];
  }

  void move_left(std::uint32_t row) override {
    sum_left_ += t_[row];
    sum_right_ -= t_[row];
  }

  // Minimizing child SSE is maximizing SL^2/nL + SR^2/nR.
  double split_score(std::size_t nl, std::size_t nr) override {
    return -(sum_left_ * sum_left_ / static_cast<double>(nl) + sum_right_ * sum_right_ / static_cast<double>(nr));
  }

 private:
  std::span<const double> t_;
  LeafValue leaf_value_;
  double sum_left_ = 0.0, sum_right_ = 0.0;
};

std::size_t infer_classes(std::span<const int> y, std::size_t num_classes, const char* who) {
  int hi = -1;
  for (int c : y) {
    if (c < 0) throw DataError(fmt::format("{}: negative label {}", who, c));
    hi = std::max(hi, c);
  }
  const auto k = static_cast<std::size_t>(hi + 1);
  if (num_classes == 0) return k;
  if (k > num_classes) throw DataError(fmt::format("{}: label {} outside [0, {})", who, hi, num_classes));
  return num_classes;
}

void check_xy(const Matrix& X, std::span<const int> y, const char* who) {
  if (X.rows() == 0 || y.empty()) throw DataError(fmt::format("{}: empty input", who));
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw DataError(fmt::format("{}: {} rows but {} labels", who, X.rows(), y.size()));
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double DecisionTree::class_fraction(std::span<const double> x, int cls) const {
  const auto& h = leaf(x).histogram;
  const double total = std::accumulate(h.begin(), h.end(), 0.0);
  if (total == 0.0 || cls < 0 || static_cast<std::size_t>(cls) >= h.size()) return 0.0;
  return h[static_cast<std::size_t>(cls)] / total;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children always follow their parent in the flat layout.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t DecisionTree::num_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

DecisionTree dt_fit(const Matrix& X, std::span<const int> y, const DtParams& params, std::size_t num_classes) {
  check_xy(X, y, "dt_fit");
  if (params.min_samples_split < 2) throw UsageError("dt_fit: min_samples_split must be at least 2");
  const std::size_t k = infer_classes(y, num_classes, "dt_fit");
  GiniBuilder builder(X, y, k, params);
  return DecisionTree(builder.build(), k, static_cast<std::size_t>(X.cols()));
}

SplitChoice best_gini_split(const Matrix& X, std::span<const int> y, std::size_t num_classes) {
  check_xy(X, y, "best_gini_split");
  const std::size_t k = infer_classes(y, num_classes, "best_gini_split");
  GiniBuilder probe(X, y, k, DtParams{});
  SampleLists lists(static_cast<std::size_t>(X.cols()));
  for (std::size_t f = 0; f < lists.size(); ++f) {
    lists[f].resize(static_cast<std::size_t>(X.rows()));
    std::iota(lists[f].begin(), lists[f].end(), 0u);
    const auto col = X.col(static_cast<Eigen::Index>(f));
    std::stable_sort(lists[f].begin(), lists[f].end(), [&](std::uint32_t a, std::uint32_t b) { return col(a) < col(b); });
  }
  const auto s = probe.find_split(lists);
  return {s.feature, s.threshold, s.score};
}

void LdaModel::finalize() {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericError("lda: regularized covariance is not positive definite");
  coef = llt.solve(means.transpose()).transpose();
  intercept.resize(means.rows());
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    intercept(c) = -0.5 * means.row(c).dot(coef.row(c)) + log_priors(c);
  }
}

LdaModel lda_fit(const Matrix& X, std::span<const int> y, double ridge, std::size_t num_classes) {
  check_xy(X, y, "lda_fit");
  if (!(ridge >= 0.0)) throw UsageError("lda_fit: ridge must be nonnegative");
  const std::size_t k = infer_classes(y, num_classes, "lda_fit");
  if (k < 2) throw DataError("lda_fit: need at least two classes");
  const auto d = X.cols();
  std::vector<std::size_t> counts(k, 0);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), d);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    ++counts[c];
    means.row(static_cast<Eigen::Index>(c)) += X.row(i);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] < 2) throw DataError(fmt::format("lda_fit: class {} has {} rows, need at least 2", c, counts[c]));
    means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  Eigen::MatrixXd centered(X.rows(), d);
  for (Eigen::Index i = 0; i < X.rows(); ++i) centered.row(i) = X.row(i) - means.row(y[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(X.rows() - static_cast<Eigen::Index>(k));
  const double tr = cov.trace();
  const double lambda = tr > 0.0 ? ridge * tr / static_cast<double>(d) : ridge;
  cov.diagonal().array() += lambda;

  LdaModel m;
  m.means = std::move(means);
  m.covariance = std::move(cov);
  m.log_priors.resize(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    m.log_priors(static_cast<Eigen::Index>(c)) = std::log(static_cast<double>(counts[c]) / static_cast<double>(X.rows()));
  }
  m.finalize();
  return m;
}

LdaPrediction lda_predict(const LdaModel& model, std::span<const double> x) {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  LdaPrediction p;
  p.scores = model.coef * v + model.intercept;
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p.scores.size(); ++c) {
    if (p.scores(c) > p.scores(best)) best = c;
  }
  p.label = static_cast<int>(best);
  return p;
}

double GbdtModel::raw_score(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.value(x);
  return initial_score + shrinkage * s;
}

GbdtModel gbdt_fit(const Matrix& X, std::span<const int> y, const GbdtParams& params) {
  check_xy(X, y, "gbdt_fit");
  if (!(params.shrinkage > 0.0 && params.shrinkage <= 1.0)) throw UsageError("gbdt_fit: shrinkage must lie in (0, 1]");
  if (params.max_depth == 0) throw UsageError("gbdt_fit: max_depth must be positive");
  std::size_t positives = 0;
  for (int c : y) {
    if (c != 0 && c != 1) throw DataError(fmt::format("gbdt_fit: label {} is not binary", c));
    positives += static_cast<std::size_t>(c);
  }
  if (positives == 0 || positives == y.size()) throw DataError("gbdt_fit: both classes must be present");

  const auto n = y.size();
  const double p = static_cast<double>(positives) / static_cast<double>(n);
  GbdtModel model;
  model.initial_score = std::log(p / (1.0 - p));
  model.shrinkage = params.shrinkage;

  std::vector<double> score(n, model.initial_score);
  std::vector<double> residual(n), hessian(n);
  auto newton_leaf = [&](const std::vector<std::uint32_t>& rows) {
    double g = 0.0, h = 0.0;
    for (auto r : rows) {
      g += residual[r];
      h += hessian[r];
    }
    return std::clamp(g / std::max(h, 1e-12), -4.0, 4.0);
  };

  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double q = sigmoid(score[i]);
      residual[i] = static_cast<double>(y[i]) - q;
      hessian[i] = q * (1.0 - q);
    }
    VarianceBuilder builder(X, residual, params.max_depth, newton_leaf);
    DecisionTree tree(builder.build(), 0, static_cast<std::size_t>(X.cols()));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = X.row(static_cast<Eigen::Index>(i));
      score[i] += model.shrinkage * tree.value(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double gbdt_predict_proba(const GbdtModel& model, std::span<const double> x) {
  // Large scores would round to exactly 0 or 1.
  constexpr double kEdge = 0x1p-53;
  return std::clamp(sigmoid(model.raw_score(x)), kEdge, 1.0 - kEdge);
}

double gbdt_log_loss(const GbdtModel& model, const Matrix& X, std::span<const int> y) {
  check_xy(X, y, "gbdt_log_loss");
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto row = X.row(i);
    const double z = model.raw_score(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    // log(1 + e^-z) for positives, log(1 + e^z) for negatives, computed stably.
    const double m = y[static_cast<std::size_t>(i)] == 1 ? -z : z;
    total += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  }
  return total / static_cast<double>(X.rows());
}

int ClassifierModel::predict(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          return m.predict(x);
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          return lda_predict(m, x).label;
        } else {
          return gbdt_predict_proba(m, x) >= 0.5 ? 1 : 0;
        }
      },
      model);
}

double ClassifierModel::score(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          return m.class_fraction(x, 1);
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          const auto s = lda_predict(m, x).scores;
          return s.size() > 1 ? s(1) - s(0) : 0.0;
        } else {
          return m.raw_score(x);
        }
      },
      model);
}

const char* ClassifierModel::kind() const {
  switch (model.index()) {
    case 0:
      return "decision_tree";
    case 1:
      return "lda";
    default:
      return "gbdt";
  }
}

}  // namespace eids
