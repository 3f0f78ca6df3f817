#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvfy/model/bundle.hpp"

namespace dvfy::model {

// Layout:
//   "DVFY1\n"
//   manifest: "key=value\n" lines (the first is "version=<n>"), closed by "\n"
//   u32 CRC32 of the manifest bytes
//   u32 blob count, then per blob:
//     u16 name length, name bytes, u64 payload byte length, u32 CRC32 of payload,
//     payload of little-endian floats (32- or 64-bit per manifest "blob_dtype")
inline constexpr int kCheckpointVersion = 1;

enum class BlobPrecision { kFloat32, kFloat64 };

struct Blob {
  std::string name;
  std::vector<Real> values;
};

class CheckpointFile {
 public:
  void set(const std::string& key, const std::string& value);
  /// Throws kParse when the key is missing.
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& manifest() const { return manifest_; }

  void add_blob(std::string name, std::vector<Real> values);
  /// Throws kParse when the blob is missing.
  const Blob& blob(const std::string& name) const;
  bool has_blob(const std::string& name) const;
  const std::vector<Blob>& blobs() const { return blobs_; }

 private:
  std::vector<std::pair<std::string, std::string>> manifest_;
  std::vector<Blob> blobs_;
};

void write_checkpoint(std::ostream& os, const CheckpointFile& file, BlobPrecision precision = BlobPrecision::kFloat64);
/// Errors: kParse (bad magic, truncation, malformed manifest), kVersion
/// (unsupported version), kChecksum (CRC mismatch).
CheckpointFile read_checkpoint(std::istream& is);

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file,
                           BlobPrecision precision = BlobPrecision::kFloat64);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

void encode_arch(CheckpointFile& file, const ArchConfig& arch);
ArchConfig decode_arch(const CheckpointFile& file);

/// Architecture, inference step, every named tensor under `prefix`.
void encode_bundle(CheckpointFile& file, ModelBundle& bundle, const std::string& prefix = "");
ModelBundle decode_bundle(const CheckpointFile& file, const std::string& prefix = "");

void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle,
                     BlobPrecision precision = BlobPrecision::kFloat64);
ModelBundle load_checkpoint(const std::filesystem::path& path);

std::uint32_t crc32(std::string_view bytes);

}  // namespace dvfy::model
