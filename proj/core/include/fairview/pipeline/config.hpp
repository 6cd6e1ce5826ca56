// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>

#include "fairview/classifier/train.hpp"
#include "fairview/datagen/dataset.hpp"
#include "fairview/generative/gan.hpp"
#include "fairview/inversion/encoder.hpp"
#include "fairview/semantics/views.hpp"
#include "fairview/toml_lite.hpp"

namespace fairview::pipeline {

/// One-document experiment configuration (TOML with per-stage sections).
/// Exactly one root seed; per-stage streams derive as
/// SHA-256("<root>/<stage>") (see rng.hpp).
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs/default";

  datagen::DatasetConfig dataset;
  std::array<double, 3> split_fractions = {0.8, 0.1, 0.1};
  generative::GanConfig gan;
  inversion::EncoderConfig encoder;
  semantics::TraversalConfig views;
  int filter_steps = 300;
  classifier::TrainConfig cls;
  double tau_step = 0.05;
  bool eval_prenoise_labels = true;

  /// Fills every stage seed from the root seed.
  void derive_stage_seeds();

  static ExperimentConfig from_toml(const TomlTable& t);
  static ExperimentConfig load(const std::filesystem::path& path);

  json to_json() const;
  /// Fingerprint of one stage's configuration (inputs are hashed separately).
  std::string stage_fingerprint(const std::string& stage) const;
};

/// Default configuration document, shipped for reference and used verbatim
/// in tests. Paper-derived hyperparameters are annotated in-line.
std::string default_config_toml();

}  // namespace fairview::pipeline
