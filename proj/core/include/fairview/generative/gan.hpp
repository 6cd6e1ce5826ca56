// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairview/datagen/dataset.hpp"
#include "fairview/nn/net.hpp"

namespace fairview::generative {

struct GanConfig {
  std::size_t d_z = 64;
  std::size_t d_w = 64;
  std::size_t base_channels = 64;   // synthesis width at the 8x8 root
  std::size_t map_hidden = 64;
  int steps = 4000;
  int batch = 16;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int checkpoint_every = 500;
  bool r1_enabled = false;          // directional gradient-penalty estimator
  double r1_gamma = 1.0;
  double r1_eps = 1e-2;
  std::uint64_t seed = 1;

  void validate() const;
  json to_json() const;
  static GanConfig from_json(const json& j);
};

/// Mapping network, style-modulated synthesis decoder, and discriminator.
/// The synthesis root is a learned constant scaled channel-wise by
/// s = A w + b; A ("synthesis.style.affine_weight") is the matrix the
/// factorization stage decomposes.
struct GeneratorBundle {
  GanConfig cfg;
  nn::Sequential<float> mapping;        // (N, d_z) -> (N, d_w)
  nn::Sequential<float> synthesis;      // (N, d_w) -> (N, 3, H, W), tanh output
  nn::Sequential<float> discriminator;  // (N, 3, H, W) -> (N, 1) logit
  json manifest = json::object();
  int image_size = 32;

  static GeneratorBundle build(const GanConfig& cfg, int image_size);

  /// w = M(z). Deterministic; throws on dimension mismatch.
  TensorF map_latent(const TensorF& z);

  /// Image in [0, 1], shape (N, 3, H, W): (tanh + 1) / 2.
  TensorF generate(const TensorF& w);

  /// Copy of the first (and only) latent-consuming affine weight, d_feat x d_w.
  std::vector<float> style_affine_weight(std::size_t* rows, std::size_t* cols);

  void save(const std::filesystem::path& dir);
  static GeneratorBundle load(const std::filesystem::path& dir);
  std::string checksum();
};

struct GanHistoryRow {
  int step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
};

struct TrainGanResult {
  GeneratorBundle bundle;
  std::vector<GanHistoryRow> history;
};

/// Adversarial training with the non-saturating logistic loss. Writes a
/// rolling checkpoint into `checkpoint_dir` every cfg.checkpoint_every steps
/// when the directory is non-empty; aborts with a diagnostic checkpoint on
/// non-finite loss.
TrainGanResult train_gan(const datagen::Dataset& ds, const GanConfig& cfg,
                         const std::filesystem::path& checkpoint_dir = {});

/// Fraction of correct real-vs-fake calls on held-out data (logit sign).
double discriminator_accuracy(GeneratorBundle& bundle, const datagen::Dataset& held_out,
                              std::size_t n_per_side, std::uint64_t seed);

struct QualityReport {
  double stat_distance = 0.0;       // channel mean + covariance discrepancy
  double memorization_score = 0.0;  // mean nearest-real pixel MSE of samples
  std::size_t n_generated = 0;
  std::size_t n_real = 0;

  json to_json() const;
};

/// Desk-scale sample-quality proxy: distance between channel statistics of a
/// generated set and the dataset, plus a nearest-neighbor memorization score.
QualityReport sample_quality_report(GeneratorBundle& bundle, const datagen::Dataset& ds,
                                    std::size_t n_samples, std::uint64_t seed);

/// Channel statistic distance between two pixel sets (exposed for tests).
double channel_stat_distance(const std::vector<float>& a_hwc, const std::vector<float>& b_hwc);

}  // namespace fairview::generative
