#include "eids/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace eids {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

}  // namespace

void RecordSchema::validate() const {
  if (feature_kinds.size() != feature_names.size()) {
    throw DataError("schema: feature kinds and names differ in length");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : feature_names) {
    if (!seen.insert(name).second) throw DataError(fmt::format("schema: duplicate feature '{}'", name));
  }
  if (seen.contains(label_column)) {
    throw DataError(fmt::format("schema: label column '{}' is also a feature", label_column));
  }
}

std::size_t RecordSchema::index_of(const std::string& name) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), name);
  return it == feature_names.end() ? npos : static_cast<std::size_t>(it - feature_names.begin());
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int c : y) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.schema = schema;
  out.class_names = class_names;
  out.categories = categories;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(y[rows[i]]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw DataError(fmt::format("dataset: {} feature rows but {} labels", X.rows(), y.size()));
  }
  if (static_cast<std::size_t>(X.cols()) != schema.width()) {
    throw DataError(fmt::format("dataset: {} columns but schema has {}", X.cols(), schema.width()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= class_names.size()) {
      throw DataError(fmt::format("dataset: row {} has label code {} outside [0, {})", i, y[i],
                                  class_names.size()));
    }
  }
  if (!X.allFinite()) throw DataError("dataset: non-finite feature value");
}

std::uint64_t ClassCatalog::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<double> ClassCatalog::proportions() const {
  const double n = static_cast<double>(total());
  std::vector<double> p;
  p.reserve(counts.size());
  for (auto c : counts) p.push_back(n > 0 ? static_cast<double>(c) / n : 0.0);
  return p;
}

ClassCatalog ClassCatalog::edge_iiotset() {
  return ClassCatalog{
      {"Normal", "DDoS_UDP", "DDoS_ICMP", "SQL_injection", "DDoS_TCP", "Vulnerability_scanner",
       "Password", "DDoS_HTTP", "Uploading", "Backdoor", "Port_Scanning", "XSS", "Ransomware",
       "Fingerprinting", "MITM"},
      {1380858, 121567, 67939, 50826, 50062, 50026, 49933, 49203, 36915, 24026, 19983, 15066, 9689,
       853, 358}};
}

ClassCatalog ClassCatalog::uniform(std::vector<std::string> names) {
  ClassCatalog c;
  c.counts.assign(names.size(), 1);
  c.names = std::move(names);
  return c;
}

void ClassCatalog::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << ',' << counts[i] << '\n';
}

ClassCatalog ClassCatalog::load(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  ClassCatalog c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    std::uint64_t count = 0;
    const auto& f = fields.size() == 2 ? fields[1] : std::string{};
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), count);
    if (fields.size() != 2 || ec != std::errc() || ptr != f.data() + f.size()) {
      throw DataError(fmt::format("{}:{}: expected 'name,count'", path.string(), lineno));
    }
    c.names.push_back(fields[0]);
    c.counts.push_back(count);
  }
  if (c.names.empty()) throw DataError(fmt::format("{}: empty class catalog", path.string()));
  return c;
}

void SynthSpec::validate() const {
  if (n_rows == 0) throw UsageError("synth: n_rows must be positive");
  if (n_features < 2) throw UsageError("synth: n_features must be at least 2");
  if (!(separation >= 0.0)) throw UsageError("synth: separation must be nonnegative");
  if (!(noise_sigma > 0.0)) throw UsageError("synth: noise_sigma must be positive");
  if (classes.names.empty() || classes.names.size() != classes.counts.size()) {
    throw UsageError("synth: class catalog is empty or malformed");
  }
  if (classes.total() == 0) throw UsageError("synth: class catalog has zero total count");
  const auto nonzero = static_cast<std::size_t>(
      std::count_if(classes.counts.begin(), classes.counts.end(), [](auto c) { return c > 0; }));
  if (n_rows < nonzero) {
    throw UsageError(fmt::format("synth: n_rows={} is smaller than the {} classes with nonzero proportion",
                                 n_rows, nonzero));
  }
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> parts(weights.size(), 0);
  if (weights.empty() || !(sum > 0.0)) return parts;
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    parts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(parts[i]);
    assigned += parts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++parts[order[k % order.size()]];
  // Floating error can overshoot by one on pathological inputs.
  for (std::size_t k = order.size(); assigned > total; --assigned) {
    --k;
    if (parts[order[k]] > 0) --parts[order[k]];
  }
  return parts;
}

RecordSchema infer_schema(const std::filesystem::path& path, const std::string& label_column,
                          std::span<const std::string> drop_columns) {
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file", path.string()));
  const auto header = split_csv_line(line);
  std::vector<bool> numeric(header.size(), true);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    for (std::size_t j = 0; j < std::min(fields.size(), header.size()); ++j) {
      double v;
      if (numeric[j] && !parse_double(fields[j], v)) numeric[j] = false;
    }
  }
  RecordSchema schema;
  schema.label_column = label_column;
  bool has_label = false;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_column) {
      has_label = true;
      continue;
    }
    if (std::find(drop_columns.begin(), drop_columns.end(), header[j]) != drop_columns.end()) continue;
    schema.feature_names.push_back(header[j]);
    schema.feature_kinds.push_back(numeric[j] ? FeatureKind::kNumeric : FeatureKind::kCategorical);
  }
  if (!has_label) throw DataError(fmt::format("{}: missing label column '{}'", path.string(), label_column));
  schema.validate();
  return schema;
}

Dataset load_csv(const std::filesystem::path& path, const RecordSchema& schema) {
  schema.validate();
  auto in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError(fmt::format("{}: empty file", path.string()));
  const auto header = split_csv_line(line);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) position.emplace(header[j], j);
  auto column_of = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw DataError(fmt::format("{}: missing column '{}'", path.string(), name));
    return it->second;
  };
  const std::size_t label_pos = column_of(schema.label_column);
  std::vector<std::size_t> feature_pos;
  for (const auto& name : schema.feature_names) feature_pos.push_back(column_of(name));

  const std::size_t d = schema.width();
  std::vector<double> values;
  std::vector<std::string> labels;
  // Categorical cells are collected as text and indexed once the vocabulary is known.
  std::vector<std::vector<std::string>> cat_cells(d);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("{}: row {} has {} fields, header has {}", path.string(), row, fields.size(),
                                  header.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto& cell = fields[feature_pos[j]];
      if (schema.feature_kinds[j] == FeatureKind::kNumeric) {
        double v;
        if (!parse_double(cell, v)) {
          throw DataError(fmt::format("{}: row {} column '{}': cannot parse '{}' as a number", path.string(), row,
                                      schema.feature_names[j], cell));
        }
        values.push_back(v);
      } else {
        values.push_back(0.0);
        cat_cells[j].push_back(cell);
      }
    }
    labels.push_back(fields[label_pos]);
  }
  if (row == 0) throw DataError(fmt::format("{}: no data rows", path.string()));

  Dataset ds;
  ds.schema = schema;
  ds.X = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
  ds.categories.assign(d, {});
  for (std::size_t j = 0; j < d; ++j) {
    if (schema.feature_kinds[j] != FeatureKind::kCategorical) continue;
    std::set<std::string> vocab(cat_cells[j].begin(), cat_cells[j].end());
    ds.categories[j].assign(vocab.begin(), vocab.end());
    std::unordered_map<std::string, double> code;
    for (std::size_t k = 0; k < ds.categories[j].size(); ++k) code.emplace(ds.categories[j][k], static_cast<double>(k));
    for (std::size_t i = 0; i < row; ++i) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = code.at(cat_cells[j][i]);
    }
  }
  std::set<std::string> names(labels.begin(), labels.end());
  ds.class_names.assign(names.begin(), names.end());
  std::unordered_map<std::string, int> label_code;
  for (std::size_t k = 0; k < ds.class_names.size(); ++k) label_code.emplace(ds.class_names[k], static_cast<int>(k));
  ds.y.reserve(labels.size());
  for (const auto& l : labels) ds.y.push_back(label_code.at(l));
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& name : ds.schema.feature_names) out << csv_field(name) << ',';
  out << csv_field(ds.schema.label_column) << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      const double v = ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!ds.categories.empty() && !ds.categories[j].empty()) {
        out << csv_field(ds.categories[j][static_cast<std::size_t>(v)]);
      } else {
        // Shortest representation that round-trips exactly.
        char buf[32];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, ptr - buf);
      }
      out << ',';
    }
    out << csv_field(ds.class_names[static_cast<std::size_t>(ds.y[i])]) << '\n';
  }
}

Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const auto props = spec.classes.proportions();
  const auto counts = largest_remainder(spec.n_rows, props);
  const std::size_t k = spec.classes.names.size();
  const std::size_t d = spec.n_features;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  // Every class except Normal sits on a random vertex of a cube centered at
  // 0.5 with half-edge separation * noise_sigma; Normal sits at the center.
  // Normal and an attack class differ by separation * noise_sigma on every
  // axis, two attack classes by twice that on about half the axes, and since
  // the vertex signs are independent the axes stay weakly correlated.
  const double half_edge = spec.separation * spec.noise_sigma;
  const auto& names = spec.classes.names;
  Matrix centers = Matrix::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d), 0.5);
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (names[static_cast<std::size_t>(c)] == kNormalClass) continue;
    // Redraw the rare exact duplicate so every class keeps its own center.
    for (bool dup = true; dup;) {
      for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(c, j) = 0.5 + (unit(rng) < 0.5 ? -half_edge : half_edge);
      dup = false;
      for (Eigen::Index o = 0; o < c && !dup && half_edge > 0.0; ++o) dup = centers.row(o) == centers.row(c);
    }
  }

  std::vector<int> labels;
  labels.reserve(spec.n_rows);
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset ds;
  ds.class_names = spec.classes.names;
  ds.schema.label_column = "Attack_type";
  for (std::size_t j = 0; j < d; ++j) {
    ds.schema.feature_names.push_back(fmt::format("f{:02}", j));
    ds.schema.feature_kinds.push_back(FeatureKind::kNumeric);
  }
  ds.categories.assign(d, {});
  ds.X.resize(static_cast<Eigen::Index>(spec.n_rows), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      const double v = centers(labels[i], j) + noise(rng);
      ds.X(r, j) = std::isfinite(v) ? v : 0.5;
    }
  }
  ds.y = std::move(labels);
  return ds;
}

Dataset to_binary(const Dataset& ds) {
  const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), kNormalClass);
  const int normal = it == ds.class_names.end() ? -1 : static_cast<int>(it - ds.class_names.begin());
  const auto universe = ClassCatalog::edge_iiotset().names;
  for (const auto& name : ds.class_names) {
    if (name != kAttackClass && std::find(universe.begin(), universe.end(), name) == universe.end()) {
      throw DataError(fmt::format("to_binary: unknown label '{}'", name));
    }
  }
  Dataset out;
  out.schema = ds.schema;
  out.X = ds.X;
  out.categories = ds.categories;
  out.class_names = {kNormalClass, kAttackClass};
  out.y.reserve(ds.y.size());
  for (int c : ds.y) out.y.push_back(c == normal ? 0 : 1);
  return out;
}

Splits stratified_split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v > 0.0)) throw UsageError("split: ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw UsageError("split: ratios must sum to 1");

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.rows(); ++i) by_class[static_cast<std::size_t>(ds.y[i])].push_back(i);

  std::array<std::vector<std::size_t>, 3> picked;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    // One stream per class keeps a class's allocation independent of the others.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::shuffle(rows.begin(), rows.end(), rng);
    auto alloc = largest_remainder(rows.size(), r);
    if (alloc[0] == 0) {
      // Training must see every class; take the row from the fuller of val/test.
      const std::size_t donor = alloc[1] >= alloc[2] ? 1 : 2;
      --alloc[donor];
      ++alloc[0];
    }
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      picked[s].insert(picked[s].end(), rows.begin() + static_cast<std::ptrdiff_t>(offset),
                       rows.begin() + static_cast<std::ptrdiff_t>(offset + alloc[s]));
      offset += alloc[s];
    }
  }
  for (auto& p : picked) std::sort(p.begin(), p.end());
  return Splits{ds.subset(picked[0]), ds.subset(picked[1]), ds.subset(picked[2])};
}

std::uint64_t fingerprint(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      const double v = ds.X(i, j);
      mix(&v, sizeof v);
    }
  }
  for (int c : ds.y) mix(&c, sizeof c);
  return h;
}

}  // namespace eids
