// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fairview {

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

/// Streaming SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// First 8 bytes of SHA-256(text), little-endian. Used to derive per-stage
/// and per-sample RNG seeds from one root seed.
std::uint64_t sha256_seed64(const std::string& text);

}  // namespace fairview
