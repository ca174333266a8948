#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "eids/classifiers.hpp"
#include "eids/dataset.hpp"
#include "test_util.hpp"

namespace eids {
namespace {

using testing::TempDir;
using testing::write_file;

// Independent largest-remainder: floor everything, then hand out the leftover
// units by descending remainder, lower index first on ties.
std::vector<std::size_t> lr_oracle(std::size_t total, const std::vector<double>& w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> out(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = static_cast<double>(total) * w[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[rem[k].second];
  return out;
}

TEST(Catalog, EdgeIiotsetMatchesPublishedCounts) {
  const auto c = ClassCatalog::edge_iiotset();
  ASSERT_EQ(c.names.size(), 15u);
  EXPECT_EQ(c.total(), 1927304u);
  EXPECT_EQ(c.names[0], "Normal");
  EXPECT_EQ(c.counts[0], 1380858u);
  EXPECT_EQ(c.total() - c.counts[0], 546446u);
  const auto p = c.proportions();
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  EXPECT_NEAR(p[0] * 100.0, 71.65, 0.005);
}

TEST(Catalog, SaveLoadRoundTrip) {
  TempDir dir;
  const auto c = ClassCatalog::edge_iiotset();
  c.save(dir / "classes.csv");
  const auto back = ClassCatalog::load(dir / "classes.csv");
  EXPECT_EQ(back.names, c.names);
  EXPECT_EQ(back.counts, c.counts);
}

TEST(LargestRemainder, MatchesOracleOnRandomWeights) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(1 + trial % 17);
    for (auto& v : w) v = u(rng) < 0.1 ? 0.0 : u(rng);
    if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) w[0] = 1.0;
    const std::size_t total = static_cast<std::size_t>(u(rng) * 5000);
    const auto got = largest_remainder(total, w);
    EXPECT_EQ(got, lr_oracle(total, w));
    EXPECT_EQ(std::accumulate(got.begin(), got.end(), std::size_t{0}), total);
  }
}

TEST(LargestRemainder, TiesGoToLowerIndex) {
  const std::vector<double> w{1.0, 1.0, 1.0};
  EXPECT_EQ(largest_remainder(4, w), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(largest_remainder(5, w), (std::vector<std::size_t>{2, 2, 1}));
}

TEST(LoadCsv, ThreeRowsTwoFeatures) {
  TempDir dir;
  write_file(dir / "a.csv", "f1,Attack_type,f2\n1.5,Normal,2\n-3,MITM,4e-1\n0,Normal,7\n");
  const auto schema = infer_schema(dir / "a.csv", "Attack_type");
  EXPECT_EQ(schema.feature_names, (std::vector<std::string>{"f1", "f2"}));
  const Dataset ds = load_csv(dir / "a.csv", schema);
  ASSERT_EQ(ds.X.rows(), 3);
  ASSERT_EQ(ds.X.cols(), 2);
  EXPECT_DOUBLE_EQ(ds.X(1, 0), -3.0);
  EXPECT_DOUBLE_EQ(ds.X(1, 1), 0.4);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"MITM", "Normal"}));
  EXPECT_EQ(ds.y, (std::vector<int>{1, 0, 1}));
}

TEST(LoadCsv, HeaderOrderDoesNotMatter) {
  TempDir dir;
  write_file(dir / "a.csv", "b,label,a\n1,x,2\n");
  RecordSchema schema{{"a", "b"}, {FeatureKind::kNumeric, FeatureKind::kNumeric}, "label"};
  const Dataset ds = load_csv(dir / "a.csv", schema);
  EXPECT_DOUBLE_EQ(ds.X(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ds.X(0, 1), 1.0);
}

TEST(LoadCsv, UnparseableCellNamesRowAndColumn) {
  TempDir dir;
  write_file(dir / "a.csv", "f1,f2,label\n1,2,Normal\n3,abc,Normal\n");
  RecordSchema schema{{"f1", "f2"}, {FeatureKind::kNumeric, FeatureKind::kNumeric}, "label"};
  try {
    load_csv(dir / "a.csv", schema);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'f2'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, MissingColumnAndEmptyFile) {
  TempDir dir;
  write_file(dir / "a.csv", "f1,label\n1,Normal\n");
  RecordSchema schema{{"f1", "f2"}, {FeatureKind::kNumeric, FeatureKind::kNumeric}, "label"};
  EXPECT_THROW(load_csv(dir / "a.csv", schema), DataError);
  write_file(dir / "empty.csv", "");
  EXPECT_THROW(load_csv(dir / "empty.csv", schema), DataError);
  write_file(dir / "header.csv", "f1,f2,label\n");
  EXPECT_THROW(load_csv(dir / "header.csv", schema), DataError);
}

TEST(LoadCsv, CategoricalColumnsAreInferred) {
  TempDir dir;
  write_file(dir / "a.csv", "proto,n,label\ntcp,1,Normal\nudp,2,DDoS_UDP\ntcp,3,Normal\n");
  const auto schema = infer_schema(dir / "a.csv", "label");
  EXPECT_EQ(schema.feature_kinds[0], FeatureKind::kCategorical);
  EXPECT_EQ(schema.feature_kinds[1], FeatureKind::kNumeric);
  const Dataset ds = load_csv(dir / "a.csv", schema);
  EXPECT_EQ(ds.categories[0], (std::vector<std::string>{"tcp", "udp"}));
  EXPECT_DOUBLE_EQ(ds.X(1, 0), 1.0);
}

TEST(LoadCsv, SaveCsvRoundTripIsExact) {
  TempDir dir;
  SynthSpec spec;
  spec.n_rows = 200;
  const Dataset ds = synth_generate(spec);
  save_csv(ds, dir / "d.csv");
  const Dataset back = load_csv(dir / "d.csv", infer_schema(dir / "d.csv", "Attack_type"));
  // Classes are re-sorted by name on load, so compare through names.
  ASSERT_EQ(back.rows(), ds.rows());
  EXPECT_EQ(back.X, ds.X);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    EXPECT_EQ(back.class_names[static_cast<std::size_t>(back.y[i])], ds.class_names[static_cast<std::size_t>(ds.y[i])]);
  }
}

TEST(Synth, NormalCountAtTenThousandRows) {
  SynthSpec spec;
  const Dataset ds = synth_generate(spec);
  const auto counts = ds.class_counts();
  EXPECT_NEAR(static_cast<double>(counts[0]), 7165.0, 1.0);
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 10000u);
  EXPECT_EQ(ds.X.cols(), 24);
  EXPECT_TRUE(ds.X.allFinite());
}

TEST(Synth, UniformFifteenRowsGivesOneEach) {
  SynthSpec spec;
  spec.n_rows = 15;
  spec.classes = ClassCatalog::uniform(ClassCatalog::edge_iiotset().names);
  const auto counts = synth_generate(spec).class_counts();
  for (auto c : counts) EXPECT_EQ(c, 1u);
}

TEST(Synth, CountsSumExactlyForAnyRowCount) {
  for (std::size_t n : {15u, 16u, 99u, 1001u, 4321u}) {
    SynthSpec spec;
    spec.n_rows = n;
    const auto counts = synth_generate(spec).class_counts();
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), n);
  }
}

TEST(Synth, TooFewRowsIsAnError) {
  SynthSpec spec;
  spec.n_rows = 5;
  EXPECT_THROW(synth_generate(spec), UsageError);
}

TEST(Synth, SameSeedSameData) {
  SynthSpec spec;
  spec.n_rows = 500;
  const Dataset a = synth_generate(spec);
  const Dataset b = synth_generate(spec);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  spec.seed = 43;
  EXPECT_NE(synth_generate(spec).X, a.X);
}

TEST(Synth, SeparatedClustersAreMemorizedByRawTree) {
  SynthSpec spec;
  spec.n_rows = 3000;
  spec.separation = 10.0;
  spec.noise_sigma = 0.1;
  const Dataset ds = synth_generate(spec);
  const DecisionTree tree = dt_fit(ds.X, ds.y, {}, ds.num_classes());
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    const auto row = ds.X.row(i);
    correct += tree.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) ==
               ds.y[static_cast<std::size_t>(i)];
  }
  EXPECT_EQ(correct, ds.rows());
}

Dataset labelled(const std::vector<std::string>& labels) {
  Dataset ds;
  ds.schema = {{"f"}, {FeatureKind::kNumeric}, "label"};
  ds.X.resize(static_cast<Eigen::Index>(labels.size()), 1);
  std::set<std::string> names(labels.begin(), labels.end());
  ds.class_names.assign(names.begin(), names.end());
  ds.categories.assign(1, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ds.X(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    ds.y.push_back(static_cast<int>(std::find(ds.class_names.begin(), ds.class_names.end(), labels[i]) -
                                    ds.class_names.begin()));
  }
  return ds;
}

TEST(ToBinary, MapsNormalToZeroAndEverythingElseToOne) {
  const Dataset ds = labelled({"Normal", "DDoS_UDP", "MITM"});
  const Dataset b = to_binary(ds);
  EXPECT_EQ(b.class_names, (std::vector<std::string>{"Normal", "Attack"}));
  EXPECT_EQ(b.y, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(b.X, ds.X);
}

TEST(ToBinary, AllNormalGivesZeros) {
  const Dataset b = to_binary(labelled({"Normal", "Normal", "Normal"}));
  EXPECT_EQ(b.y, (std::vector<int>{0, 0, 0}));
}

TEST(ToBinary, FullCatalogCounts) {
  // Apply to one row per class, then weight by the published counts.
  const auto cat = ClassCatalog::edge_iiotset();
  const Dataset ds = labelled(cat.names);
  const Dataset b = to_binary(ds);
  std::uint64_t zeros = 0, ones = 0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const auto& name = ds.class_names[static_cast<std::size_t>(ds.y[i])];
    const auto cls = static_cast<std::size_t>(std::find(cat.names.begin(), cat.names.end(), name) - cat.names.begin());
    (b.y[i] == 0 ? zeros : ones) += cat.counts[cls];
  }
  EXPECT_EQ(zeros, 1380858u);
  EXPECT_EQ(ones, 546446u);
}

TEST(ToBinary, UnknownLabelIsAnError) {
  EXPECT_THROW(to_binary(labelled({"Normal", "Teleport"})), DataError);
}

TEST(Split, OneClassHundredRows) {
  const Dataset ds = labelled(std::vector<std::string>(100, "Normal"));
  const Splits s = stratified_split(ds, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(s.train.rows(), 80u);
  EXPECT_EQ(s.val.rows(), 10u);
  EXPECT_EQ(s.test.rows(), 10u);
}

TEST(Split, BalancedTwoClassesAndDeterminism) {
  std::vector<std::string> labels(10, "Normal");
  labels.insert(labels.end(), 10, "MITM");
  const Dataset ds = labelled(labels);
  const Splits a = stratified_split(ds, {0.5, 0.25, 0.25}, 9);
  const Splits b = stratified_split(ds, {0.5, 0.25, 0.25}, 9);
  for (const Dataset* d : {&a.train, &a.val, &a.test}) {
    const auto counts = d->class_counts();
    EXPECT_EQ(counts[0], counts[1]);
  }
  EXPECT_EQ(a.train.X, b.train.X);
  EXPECT_EQ(a.val.X, b.val.X);
  EXPECT_EQ(a.test.X, b.test.X);
  EXPECT_EQ(fingerprint(a.train), fingerprint(b.train));
}

TEST(Split, PartitionAndStratificationOnSyntheticSet) {
  const Dataset ds = synth_generate(SynthSpec{});
  const SplitRatios ratios;
  const Splits s = stratified_split(ds, ratios, 42);
  EXPECT_EQ(s.train.rows() + s.val.rows() + s.test.rows(), ds.rows());

  // Union of the feature rows equals the original multiset (rows are distinct).
  std::multiset<std::vector<double>> all, parts;
  auto add = [](std::multiset<std::vector<double>>& m, const Dataset& d) {
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
      m.insert(std::vector<double>(d.X.row(i).begin(), d.X.row(i).end()));
    }
  };
  add(all, ds);
  add(parts, s.train);
  add(parts, s.val);
  add(parts, s.test);
  EXPECT_EQ(all, parts);

  const auto total = ds.class_counts();
  const auto tr = s.train.class_counts();
  const auto va = s.val.class_counts();
  const auto te = s.test.class_counts();
  for (std::size_t c = 0; c < total.size(); ++c) {
    if (total[c] == 0) continue;
    EXPECT_GT(tr[c], 0u) << ds.class_names[c];
    const double n = static_cast<double>(total[c]);
    // Rare classes go to train first, which can exceed the rounding slack.
    if (total[c] >= 10) {
      EXPECT_LE(std::abs(static_cast<double>(tr[c]) - ratios.train * n), 1.0) << ds.class_names[c];
      EXPECT_LE(std::abs(static_cast<double>(va[c]) - ratios.val * n), 1.0) << ds.class_names[c];
      EXPECT_LE(std::abs(static_cast<double>(te[c]) - ratios.test * n), 1.0) << ds.class_names[c];
    }
  }
}

TEST(Split, BadRatiosAreRejected) {
  const Dataset ds = labelled({"Normal", "Normal"});
  EXPECT_THROW(stratified_split(ds, {0.5, 0.5, 0.5}, 1), UsageError);
  EXPECT_THROW(stratified_split(ds, {1.0, 0.0, 0.0}, 1), UsageError);
}

TEST(Schema, ValidateRejectsDuplicatesAndLabelAsFeature) {
  RecordSchema dup{{"a", "a"}, {FeatureKind::kNumeric, FeatureKind::kNumeric}, "y"};
  EXPECT_THROW(dup.validate(), DataError);
  RecordSchema lab{{"a", "y"}, {FeatureKind::kNumeric, FeatureKind::kNumeric}, "y"};
  EXPECT_THROW(lab.validate(), DataError);
}

}  // namespace
}  // namespace eids
