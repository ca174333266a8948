#include "eids/bundle.hpp"

#include <fmt/format.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace eids {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'I', 'D', 'S'};

class Writer {
 public:
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void strings(const std::vector<std::string>& v) {
    uint(static_cast<std::uint64_t>(v.size()));
    for (const auto& s : v) str(s);
  }
  void doubles(const std::vector<double>& v) {
    uint(static_cast<std::uint64_t>(v.size()));
    for (double d : v) f64(d);
  }
  template <typename M>
  void matrix(const M& m) {
    uint(static_cast<std::uint64_t>(m.rows()));
    uint(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void section(const char (&tag)[5], const Writer& body) {
    bytes_.insert(bytes_.end(), tag, tag + 4);
    uint(static_cast<std::uint64_t>(body.bytes_.size()));
    bytes_.insert(bytes_.end(), body.bytes_.begin(), body.bytes_.end());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p_[i]) << (8 * i));
    p_ += sizeof(T);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  std::size_t count(std::size_t min_bytes_each) {
    const auto n = uint<std::uint64_t>();
    if (min_bytes_each > 0 && n > remaining() / min_bytes_each) truncated();
    return static_cast<std::size_t>(n);
  }
  std::vector<std::string> strings() {
    std::vector<std::string> v(count(4));
    for (auto& s : v) s = str();
    return v;
  }
  std::vector<double> doubles() {
    std::vector<double> v(count(8));
    for (auto& d : v) d = f64();
    return v;
  }
  template <typename M>
  M matrix() {
    const auto rows = uint<std::uint64_t>();
    const auto cols = uint<std::uint64_t>();
    if (cols != 0 && rows > remaining() / 8 / cols) truncated();
    M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
    return m;
  }
  Eigen::VectorXd vector() {
    const auto v = doubles();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  Reader sub(std::size_t n) {
    need(n);
    Reader r(p_, n);
    p_ += n;
    return r;
  }
  std::array<char, 4> tag() {
    need(4);
    std::array<char, 4> t{};
    std::memcpy(t.data(), p_, 4);
    p_ += 4;
    return t;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) truncated();
  }
  [[noreturn]] static void truncated() { throw BundleError(BundleError::Code::kTruncated, "bundle: truncated file"); }

  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

void write_tree(Writer& w, const DecisionTree& t) {
  w.uint(static_cast<std::uint64_t>(t.num_classes()));
  w.uint(static_cast<std::uint64_t>(t.num_features()));
  w.uint(static_cast<std::uint64_t>(t.nodes().size()));
  for (const auto& n : t.nodes()) {
    w.i32(n.feature);
    w.f64(n.threshold);
    w.i32(n.left);
    w.i32(n.right);
    w.i32(n.label);
    w.f64(n.value);
    w.uint(static_cast<std::uint32_t>(n.histogram.size()));
    for (auto h : n.histogram) w.uint(h);
  }
}

DecisionTree read_tree(Reader& r) {
  const auto k = r.uint<std::uint64_t>();
  const auto d = r.uint<std::uint64_t>();
  std::vector<TreeNode> nodes(r.count(36));
  if (nodes.empty()) throw BundleError(BundleError::Code::kInconsistent, "bundle: empty decision tree");
  for (auto& n : nodes) {
    n.feature = r.i32();
    n.threshold = r.f64();
    n.left = r.i32();
    n.right = r.i32();
    n.label = r.i32();
    n.value = r.f64();
    const auto hs = r.uint<std::uint32_t>();
    if (hs > r.remaining() / 4) throw BundleError(BundleError::Code::kTruncated, "bundle: truncated file");
    n.histogram.resize(hs);
    for (auto& h : n.histogram) h = r.uint<std::uint32_t>();
  }
  const auto size = static_cast<int>(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    if (n.feature >= static_cast<int>(d) || n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
        n.left >= size || n.right >= size) {
      throw BundleError(BundleError::Code::kInconsistent, fmt::format("bundle: malformed tree node {}", i));
    }
  }
  return DecisionTree(std::move(nodes), static_cast<std::size_t>(k), static_cast<std::size_t>(d));
}

void write_preprocessor(Writer& w, const Preprocessor& p) {
  w.strings(p.input_columns);
  w.strings(p.categories.columns);
  for (const auto& v : p.categories.vocab) w.strings(v);
  w.strings(p.filter.original_columns);
  w.strings(p.filter.dropped_constant);
  w.uint(static_cast<std::uint64_t>(p.filter.dropped_correlated.size()));
  for (const auto& d : p.filter.dropped_correlated) {
    w.str(d.dropped);
    w.str(d.kept);
    w.f64(d.r);
  }
  w.strings(p.filter.kept_columns);
  w.doubles(p.scaler.min);
  w.doubles(p.scaler.max);
  w.strings(p.labels.names());
}

Preprocessor read_preprocessor(Reader& r) {
  Preprocessor p;
  p.input_columns = r.strings();
  p.categories.columns = r.strings();
  for (std::size_t i = 0; i < p.categories.columns.size(); ++i) p.categories.vocab.push_back(r.strings());
  p.filter.original_columns = r.strings();
  p.filter.dropped_constant = r.strings();
  p.filter.dropped_correlated.resize(r.count(16));
  for (auto& d : p.filter.dropped_correlated) {
    d.dropped = r.str();
    d.kept = r.str();
    d.r = r.f64();
  }
  p.filter.kept_columns = r.strings();
  p.scaler.min = r.doubles();
  p.scaler.max = r.doubles();
  p.labels = LabelEncoderMap::from_ordered(r.strings());
  try {
    p.rebuild_index();
  } catch (const DataError& e) {
    throw BundleError(BundleError::Code::kInconsistent, std::string("bundle: ") + e.what());
  }
  return p;
}

void write_autoencoder(Writer& w, const AeParams& p) {
  w.uint(static_cast<std::uint64_t>(p.arch.widths.size()));
  for (int v : p.arch.widths) w.uint(static_cast<std::uint32_t>(v));
  for (auto a : p.arch.activations) w.uint(static_cast<std::uint8_t>(a));
  for (const auto& l : p.layers) {
    w.matrix(l.W);
    w.matrix(Eigen::MatrixXd(l.b));
  }
}

AeParams read_autoencoder(Reader& r) {
  AeParams p;
  const auto n = r.count(5);
  p.arch.widths.resize(n);
  for (auto& v : p.arch.widths) v = static_cast<int>(r.uint<std::uint32_t>());
  p.arch.activations.resize(n == 0 ? 0 : n - 1);
  for (auto& a : p.arch.activations) {
    const auto raw = r.uint<std::uint8_t>();
    if (raw > 2) throw BundleError(BundleError::Code::kInconsistent, "bundle: unknown activation");
    a = static_cast<Activation>(raw);
  }
  try {
    p.arch.validate();
  } catch (const Error& e) {
    throw BundleError(BundleError::Code::kInconsistent, std::string("bundle: ") + e.what());
  }
  for (std::size_t l = 0; l < p.arch.num_layers(); ++l) {
    LayerParams layer;
    layer.W = r.matrix<Eigen::MatrixXd>();
    const auto b = r.matrix<Eigen::MatrixXd>();
    if (layer.W.rows() != p.arch.widths[l + 1] || layer.W.cols() != p.arch.widths[l] || b.rows() != layer.W.rows() ||
        b.cols() != 1) {
      throw BundleError(BundleError::Code::kInconsistent, fmt::format("bundle: layer {} has the wrong shape", l));
    }
    layer.b = b.col(0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void write_classifier(Writer& w, const ClassifierModel& c) {
  w.str(c.name);
  w.uint(static_cast<std::uint8_t>(c.model.index()));
  w.uint(static_cast<std::uint8_t>(c.input));
  w.uint(static_cast<std::uint64_t>(c.input_width));
  if (const auto* t = std::get_if<DecisionTree>(&c.model)) {
    write_tree(w, *t);
  } else if (const auto* l = std::get_if<LdaModel>(&c.model)) {
    w.matrix(l->means);
    w.matrix(l->covariance);
    w.matrix(Eigen::MatrixXd(l->log_priors));
    w.matrix(l->coef);
    w.matrix(Eigen::MatrixXd(l->intercept));
  } else {
    const auto& g = std::get<GbdtModel>(c.model);
    w.f64(g.initial_score);
    w.f64(g.shrinkage);
    w.uint(static_cast<std::uint64_t>(g.trees.size()));
    for (const auto& t : g.trees) write_tree(w, t);
  }
}

ClassifierModel read_classifier(Reader& r) {
  ClassifierModel c;
  c.name = r.str();
  const auto kind = r.uint<std::uint8_t>();
  const auto input = r.uint<std::uint8_t>();
  if (input > 1) throw BundleError(BundleError::Code::kInconsistent, "bundle: unknown classifier input space");
  c.input = static_cast<FeatureSpace>(input);
  c.input_width = static_cast<std::size_t>(r.uint<std::uint64_t>());
  switch (kind) {
    case 0:
      c.model = read_tree(r);
      break;
    case 1: {
      LdaModel l;
      l.means = r.matrix<Eigen::MatrixXd>();
      l.covariance = r.matrix<Eigen::MatrixXd>();
      l.log_priors = r.matrix<Eigen::MatrixXd>().col(0);
      l.coef = r.matrix<Eigen::MatrixXd>();
      l.intercept = r.matrix<Eigen::MatrixXd>().col(0);
      c.model = std::move(l);
      break;
    }
    case 2: {
      GbdtModel g;
      g.initial_score = r.f64();
      g.shrinkage = r.f64();
      g.trees.resize(r.count(24));
      for (auto& t : g.trees) t = read_tree(r);
      c.model = std::move(g);
      break;
    }
    default:
      throw BundleError(BundleError::Code::kInconsistent, fmt::format("bundle: unknown classifier kind {}", kind));
  }
  return c;
}

std::size_t model_width(const ClassifierModel& c) {
  if (const auto* t = std::get_if<DecisionTree>(&c.model)) return t->num_features();
  if (const auto* l = std::get_if<LdaModel>(&c.model)) return l->num_features();
  std::size_t w = 0;
  for (const auto& t : std::get<GbdtModel>(c.model).trees) w = std::max(w, t.num_features());
  return w;
}

}  // namespace

void ModelBundle::check_consistency() const {
  auto fail = [](const std::string& msg) { throw BundleError(BundleError::Code::kInconsistent, "bundle: " + msg); };
  const auto raw = preprocessor.output_width();
  if (static_cast<std::size_t>(autoencoder.arch.input_width()) != raw) {
    fail(fmt::format("autoencoder input width {} differs from preprocessor output width {}",
                     autoencoder.arch.input_width(), raw));
  }
  if (preprocessor.scaler.min.size() != raw || preprocessor.scaler.max.size() != raw) {
    fail("scaler width differs from the kept columns");
  }
  const auto latent = static_cast<std::size_t>(autoencoder.arch.bottleneck_width());
  for (const auto& c : classifiers) {
    const auto expected = c.input == FeatureSpace::kLatent ? latent : raw;
    if (c.input_width != expected) {
      fail(fmt::format("classifier '{}' expects width {}, but its {} input has width {}", c.name, c.input_width,
                       c.input == FeatureSpace::kLatent ? "latent" : "raw", expected));
    }
    if (model_width(c) > c.input_width) fail(fmt::format("classifier '{}' model is wider than its input", c.name));
  }
}

const ClassifierModel& ModelBundle::classifier(const std::string& name) const {
  for (const auto& c : classifiers) {
    if (c.name == name) return c;
  }
  throw UsageError(fmt::format("bundle has no classifier named '{}'", name));
}

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle) {
  Writer out;
  out.bytes().insert(out.bytes().end(), kMagic.begin(), kMagic.end());
  out.uint(bundle.version);

  Writer meta;
  meta.str(bundle.metadata.created);
  meta.uint(bundle.metadata.seed);
  meta.uint(bundle.metadata.dataset_fingerprint);
  meta.str(bundle.metadata.task);
  out.section("META", meta);

  Writer prep;
  write_preprocessor(prep, bundle.preprocessor);
  out.section("PREP", prep);

  Writer ae;
  write_autoencoder(ae, bundle.autoencoder);
  out.section("AENC", ae);

  for (const auto& c : bundle.classifiers) {
    Writer cl;
    write_classifier(cl, c);
    out.section("CLSF", cl);
  }
  return std::move(out.bytes());
}

ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw BundleError(BundleError::Code::kBadMagic, "bundle: bad magic (not an EIDS model file)");
  }
  Reader r(bytes.data() + 4, bytes.size() - 4);
  ModelBundle b;
  b.version = r.uint<std::uint16_t>();
  if (b.version != kBundleVersion) {
    throw BundleError(BundleError::Code::kUnknownVersion, fmt::format("bundle: unknown format version {}", b.version));
  }
  bool have_prep = false, have_ae = false;
  while (!r.done()) {
    const auto tag = r.tag();
    const auto len = r.uint<std::uint64_t>();
    if (len > r.remaining()) throw BundleError(BundleError::Code::kTruncated, "bundle: truncated file");
    Reader body = r.sub(static_cast<std::size_t>(len));
    const std::string t(tag.begin(), tag.end());
    if (t == "META") {
      b.metadata.created = body.str();
      b.metadata.seed = body.uint<std::uint64_t>();
      b.metadata.dataset_fingerprint = body.uint<std::uint64_t>();
      b.metadata.task = body.str();
    } else if (t == "PREP") {
      b.preprocessor = read_preprocessor(body);
      have_prep = true;
    } else if (t == "AENC") {
      b.autoencoder = read_autoencoder(body);
      have_ae = true;
    } else if (t == "CLSF") {
      b.classifiers.push_back(read_classifier(body));
    }
    // Unknown sections are skipped.
  }
  if (!have_prep || !have_ae) throw BundleError(BundleError::Code::kTruncated, "bundle: missing required section");
  b.check_consistency();
  for (auto& c : b.classifiers) {
    if (auto* l = std::get_if<LdaModel>(&c.model)) {
      if (l->coef.rows() != l->means.rows() || l->intercept.size() != l->means.rows()) {
        throw BundleError(BundleError::Code::kInconsistent, "bundle: malformed LDA model");
      }
    }
  }
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  bundle.check_consistency();
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BundleError(BundleError::Code::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw BundleError(BundleError::Code::kIo, fmt::format("write to '{}' failed", path.string()));
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError(BundleError::Code::kIo, fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace eids
