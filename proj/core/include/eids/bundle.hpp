#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eids/autoencoder.hpp"
#include "eids/classifiers.hpp"
#include "eids/preprocess.hpp"

namespace eids {

inline constexpr std::uint16_t kBundleVersion = 1;

struct BundleMetadata {
  std::string created;  // ISO-8601 UTC
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::string task;  // "binary" or "multiclass"

  bool operator==(const BundleMetadata&) const = default;
};

struct ModelBundle {
  std::uint16_t version = kBundleVersion;
  BundleMetadata metadata;
  Preprocessor preprocessor;
  AeParams autoencoder;
  std::vector<ClassifierModel> classifiers;

  // Throws BundleError(kInconsistent) when widths do not line up.
  void check_consistency() const;
  const ClassifierModel& classifier(const std::string& name) const;

  bool operator==(const ModelBundle&) const = default;
};

class BundleError : public DataError {
 public:
  enum class Code { kBadMagic, kUnknownVersion, kTruncated, kInconsistent, kIo };

  BundleError(Code code, const std::string& what) : DataError(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Layout: "EIDS", u16 version, then sections of (4-byte tag, u64 length,
// payload). Integers and IEEE-754 doubles are little-endian.
std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace eids
