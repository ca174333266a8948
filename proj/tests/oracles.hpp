#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. None of these call into the code they check beyond the
// forward pass and the public fit/predict entry points.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "eids/autoencoder.hpp"
#include "eids/classifiers.hpp"
#include "eids/dataset.hpp"
#include "eids/metrics.hpp"
#include "eids/preprocess.hpp"

namespace eids::oracle {

// ---------------------------------------------------------------- gradients

// Loss evaluated only through reconstruct() + weighted_mse().
inline double loss_of(const AeParams& p, const Matrix& X, std::span<const double> w) {
  return weighted_mse(X, reconstruct(p, X), w);
}

struct GradCheck {
  std::size_t components = 0;
  double worst = 0.0;  // largest relative error seen
};

// Relative error with an absolute floor so components that vanish do not
// divide by ~0.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central differences with step h on every weight and bias.
inline GradCheck finite_difference(const AeParams& params, const Matrix& X, std::span<const double> w,
                                   double h = 1e-5) {
  const Gradients g = backward(params, X, w);
  GradCheck out;
  AeParams p = params;
  auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss_of(p, X, w);
    slot = saved - h;
    const double down = loss_of(p, X, w);
    slot = saved;
    out.worst = std::max(out.worst, rel_error(analytic, (up - down) / (2 * h)));
    ++out.components;
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& W = p.layers[l].W;
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) probe(W(i, j), g[l].W(i, j));
    }
    auto& b = p.layers[l].b;
    for (Eigen::Index i = 0; i < b.size(); ++i) probe(b(i), g[l].b(i));
  }
  return out;
}

struct GradSweep {
  std::size_t cases = 0;
  std::size_t components = 0;
  std::size_t failures = 0;  // cases with worst relative error >= tol
  double worst = 0.0;
};

// Random (architecture, params, batch, weights) cases cycling batch sizes
// 1, 7 and 32 and sigmoid/linear activations.
inline GradSweep gradient_sweep(std::size_t cases, std::uint64_t seed, double tol = 1e-5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t batches[] = {1, 7, 32};
  GradSweep s;
  for (std::size_t c = 0; c < cases; ++c) {
    const int in = 3 + static_cast<int>(rng() % 6);
    const int hid = 2 + static_cast<int>(rng() % 5);
    const int bot = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(hid, in)));
    const Activation act = c % 4 == 3 ? Activation::kLinear : Activation::kSigmoid;
    const auto arch = AeArchitecture::symmetric(in, {std::max(hid, bot)}, bot, act);
    AeParams p = init_params(arch, rng());
    // Nonzero biases so their gradients are exercised too.
    for (auto& layer : p.layers) {
      for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = u(rng) - 0.5;
    }
    const auto n = static_cast<Eigen::Index>(batches[c % 3]);
    Matrix X(n, in);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < in; ++j) X(i, j) = u(rng);
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = 0.1 + 5.0 * u(rng);
    const GradCheck g = finite_difference(p, X, w);
    ++s.cases;
    s.components += g.components;
    s.worst = std::max(s.worst, g.worst);
    if (!(g.worst < tol)) ++s.failures;
  }
  return s;
}

// ---------------------------------------------------------------------- AUC

// Area under the empirical ROC curve by the trapezoid rule, sweeping the
// threshold over distinct scores from high to low.
inline double trapezoid_auc(std::span<const int> y, std::span<const double> s) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double N = static_cast<double>(y.size()) - P;
  double tp = 0, fp = 0, prev_tpr = 0, prev_fpr = 0, area = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = s[order[k]];
    while (k < order.size() && s[order[k]] == t) {
      (y[order[k]] == 1 ? tp : fp) += 1;
      ++k;
    }
    const double tpr = tp / P, fpr = fp / N;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

// Binary confusion matrices with their expected accuracies. Codes are
// 0 = Normal and 1 = Attack, with Attack as the positive class.
struct BinaryFixture {
  const char* name;
  std::uint64_t nn, na, an, aa;  // truth-then-prediction counts
  double accuracy;
};

inline constexpr BinaryFixture kBinaryFixtures[] = {
    {"XGB", 4818, 2, 1, 25619, 0.9999},
    {"LGBM", 4820, 0, 0, 25620, 1.0000},
    {"LDA", 1771, 3049, 744, 24876, 0.8754},
    {"DT", 4817, 3, 2, 25618, 0.9998},
};

inline ConfusionMatrix to_confusion(const BinaryFixture& f) {
  ConfusionMatrix cm(2, {"Normal", "Attack"});
  cm.at(0, 0) = f.nn;
  cm.at(0, 1) = f.na;
  cm.at(1, 0) = f.an;
  cm.at(1, 1) = f.aa;
  return cm;
}

// ---------------------------------------------------------------------- CART

inline double gini(const std::map<int, double>& counts, double n) {
  if (n == 0) return 0;
  double g = 1;
  for (const auto& [k, c] : counts) g -= (c / n) * (c / n);
  return g;
}

struct Rows {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

// Every distinct threshold between consecutive sorted values of every feature.
inline std::vector<std::pair<int, double>> candidate_splits(const Rows& r) {
  std::vector<std::pair<int, double>> out;
  if (r.x.empty()) return out;
  for (std::size_t f = 0; f < r.x[0].size(); ++f) {
    std::set<double> vals;
    for (const auto& row : r.x) vals.insert(row[f]);
    for (auto it = vals.begin(); std::next(it) != vals.end(); ++it) {
      out.emplace_back(static_cast<int>(f), (*it + *std::next(it)) / 2);
    }
  }
  return out;
}

inline std::pair<Rows, Rows> partition(const Rows& r, int f, double t) {
  Rows L, R;
  for (std::size_t i = 0; i < r.y.size(); ++i) {
    Rows& d = r.x[i][static_cast<std::size_t>(f)] <= t ? L : R;
    d.x.push_back(r.x[i]);
    d.y.push_back(r.y[i]);
  }
  return {L, R};
}

// Smallest size-weighted child Gini over all root splits, divided by n.
// Returns the parent Gini when no split exists.
inline double best_root_impurity(const Rows& r) {
  const double n = static_cast<double>(r.y.size());
  std::map<int, double> all;
  for (int c : r.y) all[c] += 1;
  double best = gini(all, n);
  for (auto [f, t] : candidate_splits(r)) {
    auto [L, R] = partition(r, f, t);
    std::map<int, double> cl, cr;
    for (int c : L.y) cl[c] += 1;
    for (int c : R.y) cr[c] += 1;
    const double nl = static_cast<double>(L.y.size()), nr = static_cast<double>(R.y.size());
    best = std::min(best, (nl * gini(cl, nl) + nr * gini(cr, nr)) / n);
  }
  return best;
}

inline std::size_t majority_count(const std::vector<int>& y) {
  std::map<int, std::size_t> c;
  for (int v : y) ++c[v];
  std::size_t m = 0;
  for (const auto& [k, n] : c) m = std::max(m, n);
  return m;
}

// Correctly classified rows of the best tree of depth <= depth.
inline std::size_t best_tree_correct(const Rows& r, int depth) {
  std::size_t best = majority_count(r.y);
  if (depth == 0 || best == r.y.size()) return best;
  for (auto [f, t] : candidate_splits(r)) {
    auto [L, R] = partition(r, f, t);
    best = std::max(best, best_tree_correct(L, depth - 1) + best_tree_correct(R, depth - 1));
  }
  return best;
}

// Labels carry signal but no single split reduces impurity (XOR-like).
inline bool xor_like(const Rows& r) {
  std::map<int, double> all;
  for (int c : r.y) all[c] += 1;
  const double parent = gini(all, static_cast<double>(r.y.size()));
  return parent > 0 && best_root_impurity(r) >= parent - 1e-12;
}

inline Matrix to_matrix(const Rows& r) {
  Matrix X(static_cast<Eigen::Index>(r.y.size()), static_cast<Eigen::Index>(r.x.empty() ? 0 : r.x[0].size()));
  for (std::size_t i = 0; i < r.y.size(); ++i) {
    for (std::size_t j = 0; j < r.x[i].size(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.x[i][j];
  }
  return X;
}

// Small integer-valued fixture: 2..12 rows, 1..3 features, 2..3 classes.
inline Rows random_fixture(std::mt19937_64& rng) {
  Rows r;
  const std::size_t n = 2 + rng() % 11;
  const std::size_t d = 1 + rng() % 3;
  const int k = 2 + static_cast<int>(rng() % 2);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (auto& v : row) v = static_cast<double>(rng() % 6);
    r.x.push_back(row);
    r.y.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(k)));
  }
  return r;
}

// ------------------------------------------------------- cost sensitivity

struct CostSensitivity {
  double minority_error_weighted = 0.0;
  double minority_error_unweighted = 0.0;
};

inline double mean_row_error(const AeParams& p, const Matrix& X) {
  const Matrix R = reconstruct(p, X);
  return (X - R).array().square().rowwise().mean().mean();
}

// Rows spread along a line through the center of the unit cube: majority
// rows along a direction in features 0-3, minority rows along one in
// features 4-7, plus a little noise. The minority line is longer, but it
// carries less total squared deviation unless its rows are up-weighted. A
// width-1 bottleneck follows only one line well, so the weighting decides
// which class gets reconstructed.
inline Dataset two_line_set(std::size_t n, double minority_share, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  Dataset ds;
  const std::size_t d = 8;
  for (std::size_t j = 0; j < d; ++j) {
    ds.schema.feature_names.push_back("f" + std::to_string(j));
    ds.schema.feature_kinds.push_back(FeatureKind::kNumeric);
  }
  ds.categories.assign(d, {});
  ds.class_names = {"Normal", "MITM"};
  const auto minority = static_cast<std::size_t>(std::llround(minority_share * static_cast<double>(n)));
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool rare = i < minority;
    ds.y[i] = rare ? 1 : 0;
    const double t = (rare ? 0.4 : 0.25) * u(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const bool on_line = rare ? j >= 4 : j < 4;
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 + (on_line ? t : 0.0) + noise(rng);
    }
  }
  return ds;
}

// A 95/5 set trained once with inverse-frequency weights and once with unit
// weights; same seed, epochs and architecture.
inline CostSensitivity cost_sensitivity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Dataset tr = two_line_set(2000, 0.05, rng);
  const Dataset va = two_line_set(250, 0.05, rng);
  const Dataset te = two_line_set(250, 0.05, rng);

  const auto arch = AeArchitecture::symmetric(8, {4}, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 64;
  cfg.max_epochs = 150;
  cfg.patience = cfg.max_epochs;
  cfg.min_delta = 0.0;
  cfg.seed = seed;

  const ClassWeights weighted = class_weights(tr.y, 2);
  const ClassWeights flat{std::vector<double>(2, 1.0)};
  const AeParams a = train(tr, va, weighted, arch, cfg).best;
  const AeParams b = train(tr, va, flat, arch, cfg).best;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < te.rows(); ++i) {
    if (te.y[i] == 1) rows.push_back(i);
  }
  const Matrix Xm = te.subset(rows).X;
  return {mean_row_error(a, Xm), mean_row_error(b, Xm)};
}

}  // namespace eids::oracle
