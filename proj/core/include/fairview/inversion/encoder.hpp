// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "fairview/generative/gan.hpp"

namespace fairview::inversion {

struct EncoderConfig {
  int steps = 2500;
  int batch = 16;
  double lr = 1e-3;
  double lambda_latent = 1e-4;  // latent-norm regularizer weight
  std::uint64_t seed = 1;

  void validate() const;
  json to_json() const;
  static EncoderConfig from_json(const json& j);
};

struct EncoderBundle {
  EncoderConfig cfg;
  std::size_t d_w = 64;
  int image_size = 32;
  nn::Sequential<float> encoder;  // (N, 3, H, W) -> (N, d_w)
  json manifest = json::object();

  static EncoderBundle build(const EncoderConfig& cfg, std::size_t d_w, int image_size);

  /// w = E(x); eval mode, no parameter mutation.
  TensorF encode(const TensorF& images);

  void save(const std::filesystem::path& dir);
  static EncoderBundle load(const std::filesystem::path& dir);
  std::string checksum();
};

struct InversionResult {
  TensorF w;               // (N, d_w)
  TensorF reconstruction;  // (N, 3, H, W), exactly generate(G, w)
  std::vector<double> distortion;  // per-sample mean squared error
};

struct TrainEncoderResult {
  EncoderBundle bundle;
  std::vector<double> loss_history;  // per step
};

/// Trains E to invert the frozen generator: pixel MSE against the input plus
/// lambda_latent * mean ||E(x)||^2. Generator parameters are bit-unchanged.
TrainEncoderResult train_encoder(generative::GeneratorBundle& gan,
                                 const datagen::Dataset& ds, const EncoderConfig& cfg);

InversionResult invert(EncoderBundle& encoder, generative::GeneratorBundle& gan,
                       const TensorF& images);

/// Mean per-pixel squared error between two equally shaped image tensors.
double image_mse(const TensorF& a, const TensorF& b);

/// Mean inversion distortion of `encoder` over up to n samples of ds.
double mean_distortion(EncoderBundle& encoder, generative::GeneratorBundle& gan,
                       const datagen::Dataset& ds, std::size_t n);

}  // namespace fairview::inversion
