#include "eids/workflow.hpp"

#include <fmt/format.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace eids {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Re-throws library errors with the failing stage prepended, keeping the type
// so the CLI can still map it to an exit code.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const BundleError& e) {
    throw BundleError(e.code(), fmt::format("[{}] {}", name, e.what()));
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("[{}] {}", name, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  } catch (const UsageError& e) {
    throw UsageError(fmt::format("[{}] {}", name, e.what()));
  }
}

std::string utc_stamp(const char* format) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError(fmt::format("cannot write '{}'", p.string()));
  return out;
}

const Dataset& pick_split(const Splits& s, const std::string& which) {
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  if (which == "test") return s.test;
  throw UsageError(fmt::format("unknown split '{}' (expected train, val or test)", which));
}

LabelEncoderMap task_labels(const RunConfig& cfg, const Dataset& train) {
  if (cfg.task == Task::kBinary) return LabelEncoderMap::from_ordered({kNormalClass, kAttackClass});
  std::vector<std::string> present;
  const auto counts = train.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) present.push_back(train.class_names[c]);
  }
  return LabelEncoderMap::fit(present);
}

std::vector<int> encoded_labels(const Dataset& ds, const LabelEncoderMap& labels) {
  // Classes absent from these rows need not be known to the encoder.
  const auto counts = ds.class_counts();
  std::vector<int> remap(ds.class_names.size(), -1);
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    if (counts[c] > 0) remap[c] = labels.encode(ds.class_names[c]);
  }
  std::vector<int> y;
  y.reserve(ds.rows());
  for (int c : ds.y) y.push_back(remap[static_cast<std::size_t>(c)]);
  return y;
}

std::string display_name(const std::string& name) {
  if (name == "dt") return "DecisionTree";
  if (name == "lda") return "LDA";
  if (name == "gbdt") return "GBDT";
  return name;
}

std::map<std::string, double> read_times(const fs::path& p) {
  std::map<std::string, double> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    try {
      out[line.substr(0, eq)] = std::stod(line.substr(eq + 3));
    } catch (const std::exception&) {
    }
  }
  return out;
}

void write_summary(std::ostream& out, Task task, const std::vector<ModelEvaluation>& models,
                   const std::map<std::string, double>& train_times) {
  auto train_time = [&](const std::string& n) {
    const auto it = train_times.find(n);
    return it == train_times.end() ? std::string("---") : fmt::format("{:.4f}", it->second);
  };
  if (task == Task::kBinary) {
    out << fmt::format("{:<14}{:>10}{:>11}{:>9}{:>9}{:>9}{:>10}{:>16}{:>15}\n", "Algorithm", "Accuracy", "Precision",
                       "Recall", "F1", "AUC", "Geo Mean", "Train Time (s)", "Test Time (s)");
    for (const auto& m : models) {
      const auto& r = m.report;
      out << fmt::format("{:<14}{:>10.4f}{:>11.4f}{:>9.4f}{:>9.4f}{:>9}{:>10.4f}{:>16}{:>15.4f}\n", display_name(m.name),
                         r.accuracy, r.precision, r.recall, r.f1, r.auc ? fmt::format("{:.4f}", *r.auc) : "---",
                         r.geo_mean, train_time(m.name), r.test_seconds);
    }
  } else {
    out << fmt::format("{:<14}{:>10}{:>22}{:>22}{:>22}{:>10}{:>16}{:>15}\n", "Algorithm", "Accuracy",
                       "Precision (M / W)", "Recall (M / W)", "F1 (M / W)", "Geo Mean", "Train Time (s)",
                       "Test Time (s)");
    for (const auto& m : models) {
      const auto& r = m.report;
      out << fmt::format("{:<14}{:>10.4f}{:>22}{:>22}{:>22}{:>10.4f}{:>16}{:>15.4f}\n", display_name(m.name), r.accuracy,
                         fmt::format("{:.4f} / {:.4f}", r.macro_precision, r.weighted_precision),
                         fmt::format("{:.4f} / {:.4f}", r.macro_recall, r.weighted_recall),
                         fmt::format("{:.4f} / {:.4f}", r.macro_f1, r.weighted_f1), r.geo_mean, train_time(m.name),
                         r.test_seconds);
    }
  }
}

ClassifierModel fit_classifier(const RunConfig& cfg, const std::string& name, const Matrix& X, const std::vector<int>& y,
                               std::size_t k) {
  ClassifierModel c;
  c.name = name;
  c.input = cfg.classifier_features;
  c.input_width = static_cast<std::size_t>(X.cols());
  if (name == "dt") {
    c.model = dt_fit(X, y, cfg.dt, k);
  } else if (name == "lda") {
    c.model = lda_fit(X, y, cfg.lda_ridge, k);
  } else if (name == "gbdt") {
    if (k != 2) throw UsageError("gbdt is a binary classifier; use task = binary");
    c.model = gbdt_fit(X, y, cfg.gbdt);
  } else {
    throw UsageError(fmt::format("unknown classifier '{}' (expected dt, lda or gbdt)", name));
  }
  return c;
}

}  // namespace

fs::path resolve_run_dir(const RunConfig& cfg) {
  fs::path dir;
  if (!cfg.run_dir.empty()) {
    dir = cfg.run_dir;
  } else {
    const auto base = fs::path(cfg.output_dir) / fmt::format("run-{}-seed{}", utc_stamp("%Y%m%dT%H%M%SZ"), cfg.seed);
    dir = base;
    for (int i = 1; fs::exists(dir); ++i) dir = fs::path(base.string() + "-" + std::to_string(i));
  }
  fs::create_directories(dir);
  return dir;
}

fs::path resolve_bundle(const RunConfig& cfg, const fs::path& run_dir) {
  return cfg.bundle.empty() ? run_dir / "model.eids" : fs::path(cfg.bundle);
}

Dataset load_dataset(const RunConfig& cfg) {
  return stage("load", [&] {
    if (cfg.input_csv.empty()) return synth_generate(cfg.synth_spec());
    const auto schema = infer_schema(cfg.input_csv, cfg.label_column, cfg.drop_columns);
    return load_csv(cfg.input_csv, schema);
  });
}

Splits split_dataset(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg);
  return stage("split", [&] { return stratified_split(ds, cfg.split, cfg.seed); });
}

Splits task_view(const RunConfig& cfg, const Splits& splits) {
  if (cfg.task != Task::kBinary) return splits;
  return stage("relabel", [&] {
    return Splits{to_binary(splits.train), to_binary(splits.val), to_binary(splits.test)};
  });
}

SynthOutputs cmd_synth(const RunConfig& cfg, const fs::path& run_dir) {
  return stage("synth", [&] {
    const Dataset ds = synth_generate(cfg.synth_spec());
    SynthOutputs out{run_dir / "data.csv", run_dir / "classes.csv", ds.rows()};
    save_csv(ds, out.csv);
    ClassCatalog catalog;
    catalog.names = ds.class_names;
    for (auto c : ds.class_counts()) catalog.counts.push_back(c);
    catalog.save(out.catalog);
    return out;
  });
}

TrainOutputs cmd_train(const RunConfig& cfg, const fs::path& run_dir) {
  const Splits original = split_dataset(cfg);
  const Splits splits = task_view(cfg, original);
  const auto labels = task_labels(cfg, splits.train);

  const Preprocessor prep = stage("preprocess", [&] {
    return Preprocessor::fit(splits.train, labels, cfg.corr_threshold);
  });
  const Dataset train_pp = stage("preprocess", [&] { return prep.apply(splits.train); });
  const Dataset val_pp = stage("preprocess", [&] { return prep.apply(splits.val); });
  // The autoencoder is weighted by traffic type even for binary tasks, so
  // rare attack types are not drowned out inside the Attack class.
  RunConfig type_cfg = cfg;
  type_cfg.task = Task::kMulticlass;
  const auto ae_labels = task_labels(type_cfg, original.train);
  Dataset ae_train = train_pp;
  Dataset ae_val = val_pp;
  const ClassWeights weights = stage("class-weights", [&] {
    ae_train.y = encoded_labels(original.train, ae_labels);
    ae_train.class_names = ae_labels.names();
    ae_val.y = encoded_labels(original.val, ae_labels);
    ae_val.class_names = ae_labels.names();
    return class_weights(ae_train.y, ae_labels.size());
  });

  const auto arch = stage("autoencoder", [&] {
    auto a = cfg.architecture(static_cast<int>(prep.output_width()));
    a.validate();
    return a;
  });
  auto t0 = Clock::now();
  TrainResult ae = stage("autoencoder", [&] {
    if (!cfg.pretrain_normal_only) return train(ae_train, ae_val, weights, arch, cfg.train_config());
    const int normal = ae_labels.encode(kNormalClass);
    auto normal_rows = [normal](const Dataset& ds) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.y[i] == normal) rows.push_back(i);
      }
      return ds.subset(rows);
    };
    return train(normal_rows(ae_train), normal_rows(ae_val), weights, arch, cfg.train_config());
  });
  const double ae_seconds = seconds_since(t0);

  const Matrix features = cfg.classifier_features == FeatureSpace::kLatent ? encode(ae.best, train_pp.X) : train_pp.X;

  TrainOutputs out;
  out.train_seconds["autoencoder"] = ae_seconds;
  ModelBundle& bundle = out.bundle;
  bundle.metadata = {utc_stamp("%Y-%m-%dT%H:%M:%SZ"), cfg.seed, fingerprint(splits.train), to_string(cfg.task)};
  bundle.preprocessor = prep;
  bundle.autoencoder = ae.best;
  for (const auto& name : cfg.resolved_classifiers()) {
    t0 = Clock::now();
    bundle.classifiers.push_back(
        stage("classifier", [&] { return fit_classifier(cfg, name, features, train_pp.y, labels.size()); }));
    out.train_seconds[name] = seconds_since(t0);
  }

  out.bundle_path = resolve_bundle(cfg, run_dir);
  out.loss_curve = run_dir / "loss_curve.csv";
  out.log = run_dir / "train.log";
  out.record = ae.record;
  stage("save", [&] {
    if (out.bundle_path.has_parent_path()) fs::create_directories(out.bundle_path.parent_path());
    save_bundle(bundle, out.bundle_path);
    ae.record.save_csv(out.loss_curve);
    cfg.save(run_dir / "config.txt");
    auto times = open_out(out.bundle_path.parent_path() / "train_times.txt");
    for (const auto& [k, v] : out.train_seconds) times << fmt::format("{} = {:.6f}\n", k, v);

    auto log = open_out(out.log);
    log << "# effective configuration\n" << cfg.to_text() << '\n';
    log << "# data\n";
    log << fmt::format("rows.train = {}\nrows.val = {}\nrows.test = {}\n", splits.train.rows(), splits.val.rows(),
                       splits.test.rows());
    log << fmt::format("dataset_fingerprint = {:016x}\n", bundle.metadata.dataset_fingerprint);
    log << "\n# preprocessing\n";
    for (const auto& c : prep.filter.dropped_constant) log << fmt::format("dropped_constant = {}\n", c);
    for (const auto& d : prep.filter.dropped_correlated) {
      log << fmt::format("dropped_correlated = {} (|r| = {:.4f} with {})\n", d.dropped, std::abs(d.r), d.kept);
    }
    log << fmt::format("kept_columns = {}\n", prep.filter.kept_columns.size());
    log << "scaling = min-max from training rows, no clipping\n";
    log << "class_weight_formula = N / (K * n_c)\n";
    for (std::size_t c = 0; c < weights.size(); ++c) {
      log << fmt::format("class_weight.{} = {:.6f}\n", ae_labels.names()[c], weights.w[c]);
    }
    log << "\n# autoencoder\n";
    log << "widths =";
    for (int w : arch.widths) log << ' ' << w;
    log << fmt::format("\nactivation = {}\nloss = weighted mean squared error (per-row feature mean)\n",
                       to_string(cfg.ae_activation));
    log << fmt::format("epochs_run = {}\nbest_epoch = {}\nbest_val_loss = {:.8g}\n", ae.record.val_loss.size(),
                       ae.record.best_epoch, ae.record.best_val_loss());
    log << "checkpoint = best validation epoch restored\n";
    log << "\n# classifiers\n";
    log << fmt::format("features = {}\n", cfg.classifier_features == FeatureSpace::kLatent ? "latent" : "raw");
    for (const auto& [k, v] : out.train_seconds) log << fmt::format("train_seconds.{} = {:.6f}\n", k, v);
    return 0;
  });
  return out;
}

EvaluateOutputs cmd_evaluate(const RunConfig& cfg, const fs::path& bundle_path, const fs::path& run_dir) {
  const ModelBundle bundle = stage("load-bundle", [&] { return load_bundle(bundle_path); });
  const Splits splits = task_view(cfg, split_dataset(cfg));
  const Dataset& ds = pick_split(splits, cfg.evaluate_split);
  const auto& labels = bundle.preprocessor.labels;
  const auto y = stage("evaluate", [&] { return encoded_labels(ds, labels); });
  const Matrix X = stage("evaluate", [&] { return raw_features(bundle.preprocessor, ds); });
  const bool binary = cfg.task == Task::kBinary;
  if (binary && labels.size() != 2) throw UsageError("[evaluate] task is binary but the bundle is multiclass");

  EvaluateOutputs out;
  for (const auto& clf : bundle.classifiers) {
    stage("evaluate", [&] {
      Detector det(bundle, clf);
      std::vector<int> pred(ds.rows());
      const auto t0 = Clock::now();
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        pred[static_cast<std::size_t>(i)] = det.classify({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())});
      }
      const double test_seconds = seconds_since(t0);
      ModelEvaluation m{clf.name, confusion(y, pred, labels.size(), labels.names()), {}};
      m.report = binary ? binary_metrics(m.confusion, 1) : multiclass_metrics(m.confusion);
      m.report.test_seconds = test_seconds;
      if (binary && m.confusion.support(0) > 0 && m.confusion.support(1) > 0) {
        std::vector<double> scores(ds.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
          scores[static_cast<std::size_t>(i)] = det.score({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())});
        }
        m.report.auc = auc(y, scores);
      }
      out.models.push_back(std::move(m));
      return 0;
    });
  }

  out.metrics = run_dir / "metrics.txt";
  out.summary = run_dir / "summary.txt";
  stage("report", [&] {
    auto metrics = open_out(out.metrics);
    metrics << fmt::format("task = {}\nsplit = {}\nrows = {}\n", to_string(cfg.task), cfg.evaluate_split, ds.rows());
    metrics << "positive_class = " << (binary ? kAttackClass : "n/a") << '\n';
    for (const auto& m : out.models) {
      write_key_values(metrics, "model." + m.name, m.report, labels.names());
      const auto& cm = m.confusion;
      for (std::size_t i = 0; i < cm.num_classes(); ++i) {
        for (std::size_t j = 0; j < cm.num_classes(); ++j) {
          if (cm.at(i, j) > 0) {
            metrics << fmt::format("model.{}.confusion.{}.{} = {}\n", m.name, labels.names()[i], labels.names()[j],
                                   cm.at(i, j));
          }
        }
      }
    }
    auto summary = open_out(out.summary);
    summary << fmt::format("# {} classification, {} split ({} rows)\n\n", to_string(cfg.task), cfg.evaluate_split,
                           ds.rows());
    write_summary(summary, cfg.task, out.models, read_times(bundle_path.parent_path() / "train_times.txt"));
    for (const auto& m : out.models) {
      summary << fmt::format("\n# confusion matrix: {}\n", display_name(m.name));
      write_confusion(summary, m.confusion);
      auto single = open_out(run_dir / fmt::format("confusion_{}.txt", m.name));
      write_confusion(single, m.confusion);
    }
    return 0;
  });
  return out;
}

BenchOutputs cmd_bench(const RunConfig& cfg, const fs::path& bundle_path, const fs::path& run_dir) {
  const ModelBundle bundle = stage("load-bundle", [&] { return load_bundle(bundle_path); });
  const Splits splits = task_view(cfg, split_dataset(cfg));
  const Dataset& ds = pick_split(splits, cfg.bench_split);
  const Matrix X = stage("bench", [&] { return raw_features(bundle.preprocessor, ds); });
  BenchOutputs out;
  out.latency = stage("bench", [&] {
    return bench_inference(bundle, cfg.bench_classifier, X, cfg.bench_repeats, cfg.bench_warmup);
  });
  out.report = run_dir / "latency.txt";
  out.json = run_dir / "latency.json";
  stage("report", [&] {
    auto txt = open_out(out.report);
    write_latency(txt, out.latency);
    auto json = open_out(out.json);
    write_latency_json(json, out.latency);
    return 0;
  });
  return out;
}

PipelineOutputs cmd_pipeline(const RunConfig& cfg, const fs::path& run_dir) {
  PipelineOutputs out;
  out.train = cmd_train(cfg, run_dir);
  out.evaluate = cmd_evaluate(cfg, out.train.bundle_path, run_dir);
  out.bench = cmd_bench(cfg, out.train.bundle_path, run_dir);
  return out;
}

}  // namespace eids
