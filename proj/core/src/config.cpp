#include "eids/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace eids {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw UsageError(fmt::format("{}: '{}' is not a number", key, v));
  return out;
}

template <typename T>
T parse_uint(const std::string& key, const std::string& v) {
  T out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError(fmt::format("{}: '{}' is not a nonnegative integer", key, v));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(fmt::format("{}: '{}' is not a boolean", key, v));
}

struct Field {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string depth_text(std::size_t d) { return d == DtParams::kUnlimited ? "unlimited" : std::to_string(d); }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    auto add = [&v](std::string name, std::string help, auto get, auto set) {
      v.push_back({{std::move(name), std::move(help)}, get, set});
    };
#define EIDS_STR(key, member, help) \
  add(key, help, [](const RunConfig& c) { return c.member; }, [](RunConfig& c, const std::string& s) { c.member = s; })
#define EIDS_DBL(key, member, help)                                                  \
  add(key, help, [](const RunConfig& c) { return fmt_double(c.member); },            \
      [](RunConfig& c, const std::string& s) { c.member = parse_double(key, s); })
#define EIDS_UINT(key, member, type, help)                                           \
  add(key, help, [](const RunConfig& c) { return std::to_string(c.member); },        \
      [](RunConfig& c, const std::string& s) { c.member = parse_uint<type>(key, s); })

    EIDS_STR("input.csv", input_csv, "CSV file to ingest; empty synthesizes data");
    EIDS_STR("input.label_column", label_column, "name of the label column");
    add("input.drop_columns", "comma-separated columns to ignore",
        [](const RunConfig& c) { return join(c.drop_columns); },
        [](RunConfig& c, const std::string& s) { c.drop_columns = split_list(s); });
    EIDS_UINT("synth.n_rows", synth_rows, std::size_t, "synthetic row count");
    EIDS_UINT("synth.n_features", synth_features, std::size_t, "synthetic feature count");
    EIDS_DBL("synth.separation", synth_separation, "cluster-center spread in noise units");
    EIDS_DBL("synth.noise_sigma", synth_noise, "per-feature Gaussian noise");
    EIDS_STR("synth.catalog", synth_catalog, "class catalog file (name,count lines); empty uses Edge-IIoTset");
    EIDS_STR("output.dir", output_dir, "parent directory for run directories");
    EIDS_STR("output.run_dir", run_dir, "explicit run directory");
    EIDS_STR("output.bundle", bundle, "model bundle path");
    add("task", "binary or multiclass", [](const RunConfig& c) { return to_string(c.task); },
        [](RunConfig& c, const std::string& s) {
          if (s == "binary") {
            c.task = Task::kBinary;
          } else if (s == "multiclass") {
            c.task = Task::kMulticlass;
          } else {
            throw UsageError(fmt::format("task: '{}' is not binary or multiclass", s));
          }
        });
    EIDS_UINT("seed", seed, std::uint64_t, "seed for synthesis, splitting and training");
    EIDS_DBL("split.train", split.train, "training fraction");
    EIDS_DBL("split.val", split.val, "validation fraction");
    EIDS_DBL("split.test", split.test, "test fraction");
    EIDS_DBL("preprocess.corr_threshold", corr_threshold, "drop the later column of pairs with |r| above this");
    add("ae.hidden", "hidden widths between input and bottleneck",
        [](const RunConfig& c) {
          std::vector<std::string> s;
          for (int w : c.ae_hidden) s.push_back(std::to_string(w));
          return join(s);
        },
        [](RunConfig& c, const std::string& s) {
          c.ae_hidden.clear();
          for (const auto& w : split_list(s)) c.ae_hidden.push_back(static_cast<int>(parse_uint<unsigned>("ae.hidden", w)));
        });
    add("ae.bottleneck", "latent width", [](const RunConfig& c) { return std::to_string(c.ae_bottleneck); },
        [](RunConfig& c, const std::string& s) { c.ae_bottleneck = static_cast<int>(parse_uint<unsigned>("ae.bottleneck", s)); });
    add("ae.activation", "sigmoid, relu or linear", [](const RunConfig& c) { return to_string(c.ae_activation); },
        [](RunConfig& c, const std::string& s) { c.ae_activation = parse_activation(s); });
    EIDS_DBL("ae.learning_rate", ae.learning_rate, "Adam learning rate");
    EIDS_DBL("ae.beta1", ae.beta1, "Adam beta1");
    EIDS_DBL("ae.beta2", ae.beta2, "Adam beta2");
    EIDS_DBL("ae.epsilon", ae.epsilon, "Adam epsilon");
    EIDS_UINT("ae.batch_size", ae.batch_size, std::size_t, "mini-batch size");
    EIDS_UINT("ae.max_epochs", ae.max_epochs, std::size_t, "epoch cap");
    EIDS_UINT("ae.patience", ae.patience, std::size_t, "early-stopping patience in epochs");
    EIDS_DBL("ae.min_delta", ae.min_delta, "minimum validation improvement");
    add("ae.pretrain_normal_only", "train the autoencoder on Normal rows only",
        [](const RunConfig& c) { return std::string(c.pretrain_normal_only ? "true" : "false"); },
        [](RunConfig& c, const std::string& s) { c.pretrain_normal_only = parse_bool("ae.pretrain_normal_only", s); });
    add("classifiers", "comma list of dt, lda, gbdt; empty picks by task",
        [](const RunConfig& c) { return join(c.classifiers); },
        [](RunConfig& c, const std::string& s) { c.classifiers = split_list(s); });
    add("classifiers.features", "latent or raw",
        [](const RunConfig& c) { return std::string(c.classifier_features == FeatureSpace::kLatent ? "latent" : "raw"); },
        [](RunConfig& c, const std::string& s) {
          if (s == "latent") {
            c.classifier_features = FeatureSpace::kLatent;
          } else if (s == "raw") {
            c.classifier_features = FeatureSpace::kRaw;
          } else {
            throw UsageError(fmt::format("classifiers.features: '{}' is not latent or raw", s));
          }
        });
    add("dt.max_depth", "tree depth limit or 'unlimited'", [](const RunConfig& c) { return depth_text(c.dt.max_depth); },
        [](RunConfig& c, const std::string& s) {
          c.dt.max_depth = s == "unlimited" ? DtParams::kUnlimited : parse_uint<std::size_t>("dt.max_depth", s);
        });
    EIDS_UINT("dt.min_samples_split", dt.min_samples_split, std::size_t, "minimum rows to split a node");
    EIDS_DBL("lda.ridge", lda_ridge, "ridge factor relative to mean covariance diagonal");
    EIDS_UINT("gbdt.n_trees", gbdt.n_trees, std::size_t, "boosting rounds");
    EIDS_DBL("gbdt.shrinkage", gbdt.shrinkage, "learning rate per round");
    EIDS_UINT("gbdt.max_depth", gbdt.max_depth, std::size_t, "depth of each regression tree");
    EIDS_STR("evaluate.split", evaluate_split, "train, val or test");
    EIDS_STR("bench.classifier", bench_classifier, "classifier to time");
    EIDS_STR("bench.split", bench_split, "train, val or test");
    EIDS_UINT("bench.repeats", bench_repeats, std::size_t, "timed passes over the rows");
    EIDS_UINT("bench.warmup", bench_warmup, std::size_t, "untimed warmup rows");
#undef EIDS_STR
#undef EIDS_DBL
#undef EIDS_UINT
    return v;
  }();
  return f;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key.name == key) return f;
  }
  throw UsageError(fmt::format("unknown config key '{}'", key));
}

}  // namespace

std::string to_string(Task t) { return t == Task::kBinary ? "binary" : "multiclass"; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string RunConfig::to_text() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.name.find('.');
    const auto s = dot == std::string::npos ? std::string{} : f.key.name.substr(0, dot);
    if (s != section && !out.empty()) out += '\n';
    section = s;
    out += fmt::format("{} = {}\n", f.key.name, f.get(*this));
  }
  return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("config line {}: expected 'key = value'", lineno));
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << to_text();
}

bool RunConfig::operator==(const RunConfig& o) const { return to_text() == o.to_text(); }

std::vector<std::string> RunConfig::resolved_classifiers() const {
  if (!classifiers.empty()) return classifiers;
  return task == Task::kBinary ? std::vector<std::string>{"dt", "gbdt"} : std::vector<std::string>{"dt", "lda"};
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.n_rows = synth_rows;
  s.n_features = synth_features;
  s.separation = synth_separation;
  s.noise_sigma = synth_noise;
  s.seed = seed;
  if (!synth_catalog.empty()) s.classes = ClassCatalog::load(synth_catalog);
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = ae;
  t.seed = seed;
  return t;
}

AeArchitecture RunConfig::architecture(int input_width) const {
  return AeArchitecture::symmetric(input_width, ae_hidden, ae_bottleneck, ae_activation);
}

}  // namespace eids
