#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "eids/common.hpp"

namespace eids {

// Flat tree node. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;       // classification leaves: majority class, ties to lowest code
  double value = 0.0;  // regression leaves
  std::vector<std::uint32_t> histogram;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, std::size_t num_classes, std::size_t num_features)
      : nodes_(std::move(nodes)), num_classes_(num_classes), num_features_(num_features) {}

  const TreeNode& leaf(std::span<const double> x) const {
    const TreeNode* n = &nodes_[0];
    while (!n->is_leaf()) n = &nodes_[x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right];
    return *n;
  }
  int predict(std::span<const double> x) const { return leaf(x).label; }
  double value(std::span<const double> x) const { return leaf(x).value; }
  // Fraction of the leaf's training rows that belong to `cls`.
  double class_fraction(std::span<const double> x, int cls) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return num_features_; }
  std::size_t depth() const;
  std::size_t num_leaves() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
};

struct DtParams {
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();
  std::size_t max_depth = kUnlimited;
  std::size_t min_samples_split = 2;
};

// Best root split found by exhaustive search over features and midpoint
// thresholds; exposed for tests and diagnostics.
struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // size-weighted Gini of the two children, divided by n
};

// Greedy CART with Gini impurity. Ties go to the lowest feature, then the
// lowest threshold. `num_classes` of 0 means max(y) + 1.
DecisionTree dt_fit(const Matrix& X, std::span<const int> y, const DtParams& params = {}, std::size_t num_classes = 0);
inline int dt_predict(const DecisionTree& tree, std::span<const double> x) { return tree.predict(x); }
SplitChoice best_gini_split(const Matrix& X, std::span<const int> y, std::size_t num_classes);

struct LdaModel {
  Eigen::MatrixXd means;       // K x d
  Eigen::MatrixXd covariance;  // d x d, pooled within-class plus ridge
  Eigen::VectorXd log_priors;  // K
  Eigen::MatrixXd coef;        // K x d, rows are (Sigma^-1 mu_c)^T
  Eigen::VectorXd intercept;   // K

  std::size_t num_classes() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t num_features() const { return static_cast<std::size_t>(means.cols()); }
  // Recomputes coef/intercept from means, covariance and priors.
  void finalize();

  bool operator==(const LdaModel&) const = default;
};

struct LdaPrediction {
  int label = 0;
  Eigen::VectorXd scores;
};

// `ridge` is relative: ridge * trace(Sigma) / d is added to the diagonal.
LdaModel lda_fit(const Matrix& X, std::span<const int> y, double ridge = 1e-6, std::size_t num_classes = 0);
LdaPrediction lda_predict(const LdaModel& model, std::span<const double> x);

struct GbdtParams {
  std::size_t n_trees = 100;
  double shrinkage = 0.1;
  std::size_t max_depth = 3;
};

struct GbdtModel {
  double initial_score = 0.0;
  double shrinkage = 0.1;
  std::vector<DecisionTree> trees;

  double raw_score(std::span<const double> x) const;
  bool operator==(const GbdtModel&) const = default;
};

// Binary gradient boosting on logistic loss; labels must be 0/1 with both present.
GbdtModel gbdt_fit(const Matrix& X, std::span<const int> y, const GbdtParams& params = {});
double gbdt_predict_proba(const GbdtModel& model, std::span<const double> x);
// Mean logistic loss of the model on (X, y).
double gbdt_log_loss(const GbdtModel& model, const Matrix& X, std::span<const int> y);

enum class FeatureSpace : std::uint8_t { kLatent = 0, kRaw = 1 };

// A named classifier and the feature space it consumes.
struct ClassifierModel {
  std::string name;
  FeatureSpace input = FeatureSpace::kLatent;
  std::size_t input_width = 0;
  std::variant<DecisionTree, LdaModel, GbdtModel> model;

  int predict(std::span<const double> x) const;
  // Score for ranking the positive class (code 1) in binary tasks.
  double score(std::span<const double> x) const;
  const char* kind() const;

  bool operator==(const ClassifierModel&) const = default;
};

}  // namespace eids
