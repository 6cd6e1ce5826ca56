// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fairview/array_store.hpp"
#include "fairview/tensor.hpp"

namespace fairview::datagen {

// Nuisance component ranges (closed intervals). Values are sampled uniformly
// and stored with each sample so a render is a pure function of its factors.
inline constexpr double kPosRange[2] = {-0.10, 0.10};      // center offset, fraction of size
inline constexpr double kScaleRange[2] = {0.22, 0.38};     // shape radius, fraction of size
inline constexpr double kRotRange[2] = {0.0, 1.2};   // radians
inline constexpr double kContrastRange[2] = {0.55, 1.0};
inline constexpr double kBlurRange[2] = {0.0, 1.0};        // Gaussian sigma, pixels
inline constexpr double kHueJitterRange[2] = {-0.05, 0.05};
inline constexpr std::size_t kNuisanceDims = 7;  // px py scale rot contrast blur hue

struct FactorVector {
  int class_factor = 0;             // 0 = disc, 1 = square
  int group_factor = 0;             // hue family
  std::array<double, kNuisanceDims> nuisance{};  // see ranges above

  double pos_x() const { return nuisance[0]; }
  double pos_y() const { return nuisance[1]; }
  double scale() const { return nuisance[2]; }
  double rotation() const { return nuisance[3]; }
  double contrast() const { return nuisance[4]; }
  double blur_sigma() const { return nuisance[5]; }
  double hue_jitter() const { return nuisance[6]; }
};

struct DatasetConfig {
  int groups = 4;
  std::vector<std::int64_t> per_group_count = {1000, 1000, 1000, 1000};
  std::vector<double> label_noise_by_group = {0.0, 0.0, 0.15, 0.15};
  std::vector<double> difficulty_by_group = {0.0, 0.15, 0.35, 0.55};
  int image_size = 32;
  std::uint64_t seed = 1;

  void validate() const;
  json to_json() const;
  static DatasetConfig from_json(const json& j);
};

struct SampleMeta {
  std::int64_t id = 0;
  int y = 0;           // observed label (possibly noise-flipped)
  int y_prenoise = 0;  // class_factor before label noise
  int g = 0;
  FactorVector factors;
  std::uint64_t offset = 0;  // absolute byte offset into images.bin
};

/// In-memory dataset. Images are stored exactly as on disk: float32, HWC
/// row-major, values in [0, 1], in manifest order.
struct Dataset {
  DatasetConfig cfg;
  std::vector<SampleMeta> meta;
  std::vector<float> images;

  std::size_t size() const { return meta.size(); }
  std::size_t image_elems() const {
    return static_cast<std::size_t>(cfg.image_size) * cfg.image_size * 3;
  }
  const float* image_ptr(std::size_t i) const { return images.data() + i * image_elems(); }
  float* image_ptr(std::size_t i) { return images.data() + i * image_elems(); }

  /// Content fingerprint: SHA-256 over the canonical manifest and payload.
  std::string fingerprint() const;

  /// View of a subset (copies metadata and pixels).
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Renders one sample. Pure in (f, cfg); throws config_invalid when f is out
/// of range. Output is HWC in [0, 1].
std::vector<float> render_sample(const FactorVector& f, const DatasetConfig& cfg);

Dataset generate_dataset(const DatasetConfig& cfg);

struct SplitResult {
  Dataset train, val, test;
};

/// Stratified by (y, g). Fractions must be positive (zero allowed), sum to 1.
SplitResult split(const Dataset& ds, const std::array<double, 3>& fractions,
                  std::uint64_t seed);

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Batch assembly: HWC source rows -> NCHW tensor in [0, 1].
TensorF make_batch_chw(const Dataset& ds, const std::vector<std::size_t>& indices);
void hwc_to_chw(const float* src, std::size_t h, std::size_t w, std::size_t c, float* dst);
void chw_to_hwc(const float* src, std::size_t h, std::size_t w, std::size_t c, float* dst);

}  // namespace fairview::datagen
