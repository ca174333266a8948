#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "eids/dataset.hpp"
#include "eids/preprocess.hpp"
#include "test_util.hpp"

namespace eids {
namespace {

Dataset numeric_dataset(const std::vector<std::string>& names, const Matrix& X, std::vector<int> y = {}) {
  Dataset ds;
  ds.schema.feature_names = names;
  ds.schema.feature_kinds.assign(names.size(), FeatureKind::kNumeric);
  ds.schema.label_column = "label";
  ds.X = X;
  if (y.empty()) y.assign(static_cast<std::size_t>(X.rows()), 0);
  ds.y = std::move(y);
  const int k = *std::max_element(ds.y.begin(), ds.y.end()) + 1;
  for (int c = 0; c < k; ++c) ds.class_names.push_back("c" + std::to_string(c));
  ds.categories.assign(names.size(), {});
  return ds;
}

// Oracle: textbook covariance over standard deviations in long double.
double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const long double n = static_cast<long double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(cov / std::sqrt(va * vb));
}

TEST(Pearson, AgreesWithOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(40), b(40);
    const double mix = t / 50.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = g(rng);
      b[i] = mix * a[i] + (1 - mix) * g(rng) + 1e6;  // offset exercises the two-pass form
    }
    EXPECT_NEAR(pearson(a, b), pearson_oracle(a, b), 1e-9);
  }
}

TEST(Pearson, ConstantColumnGivesZero) {
  const std::vector<double> a{1, 2, 3}, c{5, 5, 5};
  EXPECT_EQ(pearson(a, c), 0.0);
}

TEST(Filter, IdenticalColumnsDropLater) {
  Matrix X(4, 2);
  X << 1, 1, 2, 2, 3, 3, 5, 5;
  const auto st = fit_filter(numeric_dataset({"a", "b"}, X));
  ASSERT_EQ(st.dropped_correlated.size(), 1u);
  EXPECT_EQ(st.dropped_correlated[0].dropped, "b");
  EXPECT_EQ(st.dropped_correlated[0].kept, "a");
  EXPECT_NEAR(st.dropped_correlated[0].r, 1.0, 1e-12);
  EXPECT_EQ(st.kept_columns, (std::vector<std::string>{"a"}));
}

TEST(Filter, ConstantColumnDropped) {
  Matrix X(3, 2);
  X << 5, 1, 5, 2, 5, 0;
  const auto st = fit_filter(numeric_dataset({"k", "v"}, X));
  EXPECT_EQ(st.dropped_constant, (std::vector<std::string>{"k"}));
  EXPECT_EQ(st.kept_columns, (std::vector<std::string>{"v"}));
}

TEST(Filter, NoisyCopyDroppedIndependentKept) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 0.01);
  Matrix X(200, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = u(rng);
    X(i, 1) = 0.99 * X(i, 0) + noise(rng);
    X(i, 2) = u(rng);
  }
  std::vector<double> x(X.col(0).begin(), X.col(0).end()), y(X.col(1).begin(), X.col(1).end()),
      z(X.col(2).begin(), X.col(2).end());
  ASSERT_GT(pearson_oracle(x, y), 0.6);
  ASSERT_LT(std::abs(pearson_oracle(x, z)), 0.6);
  ASSERT_LT(std::abs(pearson_oracle(y, z)), 0.6);
  const auto st = fit_filter(numeric_dataset({"x", "y", "z"}, X));
  EXPECT_EQ(st.kept_columns, (std::vector<std::string>{"x", "z"}));
  ASSERT_EQ(st.dropped_correlated.size(), 1u);
  EXPECT_EQ(st.dropped_correlated[0].dropped, "y");
}

TEST(Filter, StrongNegativeCorrelationCounts) {
  Matrix X(4, 2);
  X << 1, -1, 2, -2, 3, -3, 4, -4.5;
  const auto st = fit_filter(numeric_dataset({"a", "b"}, X));
  ASSERT_EQ(st.dropped_correlated.size(), 1u);
  EXPECT_LT(st.dropped_correlated[0].r, -0.6);
}

TEST(Filter, InvariantsOnRandomData) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    Matrix X = testing::random_matrix(rng, 30, 8);
    X.col(3) = X.col(1) * 2.0;
    X.col(6).setConstant(1.0);
    std::vector<std::string> names;
    for (int j = 0; j < 8; ++j) names.push_back("f" + std::to_string(j));
    const Dataset ds = numeric_dataset(names, X);
    const auto st = fit_filter(ds, 0.6);
    EXPECT_EQ(st, fit_filter(ds, 0.6));

    std::vector<std::string> all = st.kept_columns;
    all.insert(all.end(), st.dropped_constant.begin(), st.dropped_constant.end());
    for (const auto& d : st.dropped_correlated) {
      all.push_back(d.dropped);
      EXPECT_GT(std::abs(d.r), 0.6);
    }
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, names);  // disjoint and complete
    // Kept order follows the schema.
    EXPECT_TRUE(std::is_sorted(st.kept_columns.begin(), st.kept_columns.end()));
  }
}

TEST(Scaler, TwoFourSix) {
  Matrix X(3, 1);
  X << 2, 4, 6;
  const Dataset ds = numeric_dataset({"a"}, X);
  const auto sc = fit_scaler(ds);
  EXPECT_EQ(sc.min[0], 2.0);
  EXPECT_EQ(sc.max[0], 6.0);
  const auto fs = fit_filter(ds);
  const Dataset out = transform(ds, fs, sc, LabelEncoderMap::fit(ds.class_names));
  EXPECT_EQ(out.X(0, 0), 0.0);
  EXPECT_EQ(out.X(1, 0), 0.5);
  EXPECT_EQ(out.X(2, 0), 1.0);
  // (8 - 2) / (6 - 2)
  EXPECT_EQ(sc.scale(0, 8.0), 1.5);
}

TEST(Scaler, UnitColumnIsIdentity) {
  Matrix X(5, 1);
  X << 0, 0.25, 0.5, 0.75, 1;
  const Dataset ds = numeric_dataset({"a"}, X);
  const Dataset out = transform(ds, fit_filter(ds), fit_scaler(ds), LabelEncoderMap::fit(ds.class_names));
  EXPECT_EQ(out.X, X);
}

TEST(Scaler, ConstantColumnIsNumericError) {
  Matrix X(3, 1);
  X << 1, 1, 1;
  EXPECT_THROW(fit_scaler(numeric_dataset({"a"}, X)), NumericError);
}

TEST(Transform, EmptyStateIsIdentity) {
  std::mt19937_64 rng(1);
  const Dataset ds = numeric_dataset({"a", "b"}, testing::random_matrix(rng, 6, 2, -3, 3));
  const Dataset out = transform(ds, FilterState{}, ScalerState{}, LabelEncoderMap::fit(ds.class_names));
  EXPECT_EQ(out.X, ds.X);
  EXPECT_EQ(out.y, ds.y);
}

TEST(Transform, FiveRowFixtureLosesTwoColumns) {
  Matrix X(5, 4);
  X << 1, 7, 1, 0.3,  //
      2, 7, 2, 0.1,   //
      3, 7, 3, 0.9,   //
      4, 7, 4, 0.2,   //
      5, 7, 5, 0.8;
  // c is a duplicate of a; keep d uncorrelated with a.
  std::vector<double> a(X.col(0).begin(), X.col(0).end()), d(X.col(3).begin(), X.col(3).end());
  ASSERT_LT(std::abs(pearson_oracle(a, d)), 0.6);
  const Dataset ds = numeric_dataset({"a", "b", "c", "d"}, X);
  const Preprocessor p = Preprocessor::fit(ds, LabelEncoderMap::fit(ds.class_names));
  const Dataset out = p.apply(ds);
  EXPECT_EQ(out.cols(), ds.cols() - 2);
  EXPECT_EQ(out.schema.feature_names, (std::vector<std::string>{"a", "d"}));
}

TEST(Transform, TrainingRowsLandInUnitInterval) {
  SynthSpec spec;
  spec.n_rows = 1000;
  const Dataset ds = synth_generate(spec);
  const Preprocessor p = Preprocessor::fit(ds, LabelEncoderMap::fit(ds.class_names));
  const Dataset out = p.apply(ds);
  EXPECT_GE(out.X.minCoeff(), 0.0);
  EXPECT_LE(out.X.maxCoeff(), 1.0);
}

TEST(Transform, UnseenLabelAndMissingColumnAreErrors) {
  Matrix X(2, 2);
  X << 0, 1, 1, 0;
  const Dataset ds = numeric_dataset({"a", "b"}, X, {0, 1});
  const Preprocessor p = Preprocessor::fit(ds, LabelEncoderMap::fit(ds.class_names));
  Dataset renamed = ds;
  renamed.class_names = {"c0", "zz"};
  EXPECT_THROW(p.apply(renamed), DataError);
  Dataset narrow = numeric_dataset({"b"}, X.col(1), {0, 1});
  EXPECT_THROW(p.apply(narrow), DataError);
}

TEST(Transform, IdempotentUnderRefit) {
  SynthSpec spec;
  spec.n_rows = 800;
  const Dataset ds = synth_generate(spec);
  const auto labels = LabelEncoderMap::fit(ds.class_names);
  const Dataset once = Preprocessor::fit(ds, labels).apply(ds);
  const Dataset twice = Preprocessor::fit(once, labels).apply(once);
  EXPECT_EQ(twice.schema.feature_names, once.schema.feature_names);
  EXPECT_EQ(twice.X, once.X);
}

TEST(Transform, InverseScalingRoundTrip) {
  std::mt19937_64 rng(8);
  const Dataset ds = numeric_dataset({"a", "b", "c"}, testing::random_matrix(rng, 50, 3, -1e3, 1e4));
  const FilterState fs = fit_filter(ds, 1.0);
  const ScalerState sc = fit_scaler(ds);
  const Dataset out = transform(ds, fs, sc, LabelEncoderMap::fit(ds.class_names));
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      const double back = sc.unscale(static_cast<std::size_t>(j), out.X(i, j));
      EXPECT_LE(std::abs(back - ds.X(i, j)), 1e-12 * std::max(1.0, std::abs(ds.X(i, j))));
    }
  }
}

TEST(TransformRow, MatchesBatchTransform) {
  SynthSpec spec;
  spec.n_rows = 300;
  const Dataset ds = synth_generate(spec);
  const Preprocessor p = Preprocessor::fit(ds, LabelEncoderMap::fit(ds.class_names));
  const Dataset out = p.apply(ds);
  std::vector<double> row(p.output_width());
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    const auto r = ds.X.row(i);
    p.transform_row({r.data(), static_cast<std::size_t>(r.size())}, row);
    for (std::size_t k = 0; k < row.size(); ++k) EXPECT_EQ(row[k], out.X(i, static_cast<Eigen::Index>(k)));
  }
}

TEST(Categories, UnseenValueMapsToVocabularySize) {
  Dataset train;
  train.schema = {{"proto", "n"}, {FeatureKind::kCategorical, FeatureKind::kNumeric}, "label"};
  train.categories = {{"udp", "tcp"}, {}};
  train.X.resize(2, 2);
  train.X << 0, 1, 1, 2;
  train.y = {0, 0};
  train.class_names = {"Normal"};
  const auto enc = fit_categories(train);
  EXPECT_EQ(enc.vocab[0], (std::vector<std::string>{"tcp", "udp"}));
  const Dataset coded = encode_categories(train, enc);
  EXPECT_EQ(coded.X(0, 0), 1.0);  // "udp"
  EXPECT_EQ(coded.X(1, 0), 0.0);  // "tcp"

  Dataset test = train;
  test.categories = {{"icmp", "tcp"}, {}};
  test.X << 0, 1, 1, 2;
  const Dataset t2 = encode_categories(test, enc);
  EXPECT_EQ(t2.X(0, 0), 2.0);  // unseen
  EXPECT_EQ(t2.X(1, 0), 0.0);
}

TEST(Labels, SortedCodesAndExplicitOrder) {
  const std::vector<std::string> names{"b", "a", "c"};
  const auto m = LabelEncoderMap::fit(names);
  EXPECT_EQ(m.encode("a"), 0);
  EXPECT_EQ(m.encode("c"), 2);
  EXPECT_EQ(m.decode(1), "b");
  EXPECT_EQ(m, LabelEncoderMap::fit(std::vector<std::string>{"c", "a", "b"}));
  EXPECT_THROW(m.encode("d"), DataError);
  const auto o = LabelEncoderMap::from_ordered({"Normal", "Attack"});
  EXPECT_EQ(o.encode("Normal"), 0);
  EXPECT_EQ(o.encode("Attack"), 1);
}

TEST(ClassWeights, BalancedGivesOnes) {
  std::vector<int> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const auto w = class_weights(y, 2);
  EXPECT_DOUBLE_EQ(w.w[0], 1.0);
  EXPECT_DOUBLE_EQ(w.w[1], 1.0);
}

TEST(ClassWeights, NinetyTen) {
  std::vector<int> y(90, 0);
  y.insert(y.end(), 10, 1);
  const auto w = class_weights(y, 2);
  EXPECT_NEAR(w.w[0], 100.0 / (2 * 90), 1e-15);
  EXPECT_NEAR(w.w[0], 0.5556, 1e-4);
  EXPECT_DOUBLE_EQ(w.w[1], 5.0);
}

TEST(ClassWeights, CatalogRatioMitmOverNormal) {
  const auto cat = ClassCatalog::edge_iiotset();
  std::vector<int> y;
  y.reserve(cat.total());
  for (std::size_t c = 0; c < cat.counts.size(); ++c) y.insert(y.end(), cat.counts[c], static_cast<int>(c));
  const auto w = class_weights(y, cat.counts.size());
  const std::size_t mitm = 14;
  ASSERT_EQ(cat.names[mitm], "MITM");
  EXPECT_NEAR(w.w[mitm] / w.w[0], 1380858.0 / 358.0, 1e-6);
  EXPECT_NEAR(w.w[mitm] / w.w[0], 3857.1, 0.05);

  // Normalization and ordering properties.
  double sum = 0;
  for (int c : y) sum += w[c];
  EXPECT_NEAR(sum / static_cast<double>(y.size()), 1.0, 1e-9);
  for (std::size_t a = 0; a < cat.counts.size(); ++a) {
    for (std::size_t b = 0; b < cat.counts.size(); ++b) {
      if (cat.counts[a] < cat.counts[b]) EXPECT_GT(w.w[a], w.w[b]);
    }
  }
  EXPECT_EQ(std::min_element(w.w.begin(), w.w.end()) - w.w.begin(), 0);
}

TEST(ClassWeights, AbsentClassIsAnError) {
  const std::vector<int> y{0, 0, 2};
  EXPECT_THROW(class_weights(y, 3), DataError);
}

}  // namespace
}  // namespace eids
