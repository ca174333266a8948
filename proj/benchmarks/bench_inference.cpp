// Per-row inference costs on a bundle trained once at startup from the
// default synthetic data (binary task, so the tree, LDA and GBDT are all fit).

#include <filesystem>
#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "eids/bench.hpp"
#include "eids/workflow.hpp"

namespace {

using namespace eids;

struct Fixture {
  ModelBundle bundle;
  Matrix raw;     // rows in the bundle's input layout
  Matrix scaled;  // preprocessed rows
  Matrix latent;  // encoded rows
};

const Fixture& fixture() {
  static const std::unique_ptr<Fixture> f = [] {
    const auto dir = std::filesystem::temp_directory_path() / "eids_benchmarks";
    std::filesystem::remove_all(dir);
    RunConfig cfg;
    cfg.task = Task::kBinary;
    cfg.classifiers = {"dt", "lda", "gbdt"};
    cfg.run_dir = dir.string();
    auto out = std::make_unique<Fixture>();
    out->bundle = cmd_train(cfg, dir).bundle;
    out->raw = raw_features(out->bundle.preprocessor, split_dataset(cfg).test);
    const auto& prep = out->bundle.preprocessor;
    out->scaled.resize(out->raw.rows(), static_cast<Eigen::Index>(prep.output_width()));
    for (Eigen::Index i = 0; i < out->raw.rows(); ++i) {
      prep.transform_row({out->raw.row(i).data(), static_cast<std::size_t>(out->raw.cols())},
                         {out->scaled.row(i).data(), static_cast<std::size_t>(out->scaled.cols())});
    }
    out->latent = encode(out->bundle.autoencoder, out->scaled);
    std::filesystem::remove_all(dir);
    return out;
  }();
  return *f;
}

std::span<const double> row(const Matrix& m, Eigen::Index i) {
  return {m.row(i).data(), static_cast<std::size_t>(m.cols())};
}

void BM_Transform(benchmark::State& state) {
  const Fixture& f = fixture();
  std::vector<double> out(static_cast<std::size_t>(f.scaled.cols()));
  Eigen::Index i = 0;
  for (auto _ : state) {
    f.bundle.preprocessor.transform_row(row(f.raw, i), out);
    benchmark::DoNotOptimize(out.data());
    i = (i + 1) % f.raw.rows();
  }
}
BENCHMARK(BM_Transform);

void BM_Encode(benchmark::State& state) {
  const Fixture& f = fixture();
  RowEncoder enc(f.bundle.autoencoder);
  std::vector<double> h(enc.latent_width());
  Eigen::Index i = 0;
  for (auto _ : state) {
    enc.encode(row(f.scaled, i), h);
    benchmark::DoNotOptimize(h.data());
    i = (i + 1) % f.scaled.rows();
  }
}
BENCHMARK(BM_Encode);

void BM_Classify(benchmark::State& state, const char* name) {
  const Fixture& f = fixture();
  const ClassifierModel& c = f.bundle.classifier(name);
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(c.predict(row(f.latent, i)));
    i = (i + 1) % f.latent.rows();
  }
}
BENCHMARK_CAPTURE(BM_Classify, dt, "dt");
BENCHMARK_CAPTURE(BM_Classify, lda, "lda");
BENCHMARK_CAPTURE(BM_Classify, gbdt, "gbdt");

void BM_Detector(benchmark::State& state, const char* name) {
  const Fixture& f = fixture();
  Detector d(f.bundle, f.bundle.classifier(name));
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(d.classify(row(f.raw, i)));
    i = (i + 1) % f.raw.rows();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK_CAPTURE(BM_Detector, dt, "dt");
BENCHMARK_CAPTURE(BM_Detector, gbdt, "gbdt");

void BM_EncodeBatch(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(encode(f.bundle.autoencoder, f.scaled));
  state.SetItemsProcessed(state.iterations() * f.scaled.rows());
}
BENCHMARK(BM_EncodeBatch);

}  // namespace

BENCHMARK_MAIN();
