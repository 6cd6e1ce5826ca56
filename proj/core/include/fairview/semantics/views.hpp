// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>

#include "fairview/generative/gan.hpp"
#include "fairview/inversion/encoder.hpp"
#include "fairview/semantics/sefa.hpp"

namespace fairview::semantics {

struct TraversalConfig {
  int m = 7;               // neighbors kept per sample
  int n_candidates = 56;   // generated before filtering, per round
  int dirs_per_view = 3;   // random direction subset size per view
  double distance_sigma = 1.0;
  bool scale_by_sqrt_eigenvalue = false;
  int top_k = 16;          // basis size consumed
  double filter_threshold = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  json to_json() const;
  static TraversalConfig from_json(const json& j);
};

/// Small real-vs-junk validity classifier; the stand-in for a face detector.
/// score() returns per-image probabilities of being a valid sample.
struct FilterBundle {
  nn::Sequential<float> net;  // (N,3,H,W) -> (N,1) logit
  json manifest = json::object();
  int image_size = 32;

  static FilterBundle build(int image_size);
  std::vector<float> score(const TensorF& images);
  void save(const std::filesystem::path& dir);
  static FilterBundle load(const std::filesystem::path& dir);
  std::string checksum();
};

/// Trains the validity filter on (real = valid) vs (corrupted = invalid).
FilterBundle train_validity_filter(const datagen::Dataset& ds, std::uint64_t seed,
                                   int steps = 300, int batch = 32, double lr = 1e-3);

/// mask[i] = (score_i >= threshold).
std::vector<bool> validity_filter(const std::vector<float>& scores, double threshold);

/// Deterministic corruption used to synthesize filter negatives (exposed for
/// tests): pixel shuffle, uniform noise, or channel scramble, chosen by kind.
std::vector<float> corrupt_image(const float* hwc, int size, int kind, Rng& rng);

struct ViewCache {
  TraversalConfig tc;
  std::size_t d_w = 0;
  int image_size = 32;
  std::vector<std::int64_t> sample_ids;
  std::vector<double> pass_rates;
  std::vector<std::uint8_t> starved;
  std::vector<float> payload;  // per sample: m images (HWC) then m latents
  json provenance = json::object();  // dataset/encoder/generator/basis checksums

  std::size_t image_elems() const {
    return static_cast<std::size_t>(image_size) * image_size * 3;
  }
  std::size_t sample_stride() const {
    return static_cast<std::size_t>(tc.m) * (image_elems() + d_w);
  }
  const float* views_of(std::size_t index) const {
    return payload.data() + index * sample_stride();
  }
  const float* latents_of(std::size_t index) const {
    return views_of(index) + static_cast<std::size_t>(tc.m) * image_elems();
  }
  std::size_t index_of(std::int64_t sample_id) const;
  double mean_pass_rate() const;

  void save(const std::filesystem::path& dir) const;
  static ViewCache load(const std::filesystem::path& dir);
  std::string checksum() const;

 private:
  mutable std::unordered_map<std::int64_t, std::size_t> id_index_;
};

/// Inverts every sample, perturbs along random direction subsets, generates,
/// filters, and keeps exactly m views per sample (top-up by duplication when
/// view-starved). Parallel across samples with per-sample seed streams.
ViewCache generate_views(const datagen::Dataset& ds, inversion::EncoderBundle& encoder,
                         generative::GeneratorBundle& gan, const DirectionBasis& basis,
                         const TraversalConfig& tc, FilterBundle& filter);

}  // namespace fairview::semantics
