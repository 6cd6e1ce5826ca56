// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fairview {

using json = nlohmann::json;

// Binary payload framing shared by every container in the project:
// 8-byte magic, u64 little-endian float count, then raw little-endian
// float32 values. Offsets recorded in manifests are absolute file offsets.
inline constexpr std::size_t kPayloadHeaderBytes = 16;

void write_f32_file(const std::filesystem::path& path, const char magic[8],
                    const float* data, std::size_t count);
std::vector<float> read_f32_file(const std::filesystem::path& path, const char magic[8]);
std::size_t peek_f32_count(const std::filesystem::path& path, const char magic[8]);

/// Incremental writer for large payloads (datasets, view caches).
class F32Writer {
 public:
  F32Writer(const std::filesystem::path& path, const char magic[8]);
  ~F32Writer();
  F32Writer(const F32Writer&) = delete;
  F32Writer& operator=(const F32Writer&) = delete;

  /// Absolute file offset the next append will land at.
  std::uint64_t offset() const;
  void append(const float* data, std::size_t count);
  /// Patches the element count into the header and closes the stream.
  void finish();

 private:
  struct Impl;
  Impl* impl_;
};

/// Named-array container: <dir>/header.json + <dir>/weights.bin. Used for
/// every model checkpoint (generator, discriminator, encoder, classifier,
/// validity filter) and for the direction basis.
struct ArrayStore {
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
  };

  std::vector<Entry> arrays;
  json manifest = json::object();

  void add(const std::string& name, std::vector<std::size_t> shape, const float* p,
           std::size_t n);
  void add(const std::string& name, std::vector<std::size_t> shape, std::vector<float> values);
  bool has(const std::string& name) const;
  const Entry& get(const std::string& name) const;

  void save(const std::filesystem::path& dir) const;
  static ArrayStore load(const std::filesystem::path& dir);

  /// SHA-256 over the canonical serialization (header bytes + payload bytes).
  /// Stable across save/load round-trips.
  std::string checksum() const;
};

/// "<hex>  <filename>" lines, one per tracked file, like sha256sum output.
void write_checksum_file(const std::filesystem::path& dir,
                         const std::vector<std::string>& filenames);
void verify_checksum_file(const std::filesystem::path& dir);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace fairview
