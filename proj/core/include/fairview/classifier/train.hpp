// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "fairview/classifier/model.hpp"
#include "fairview/datagen/dataset.hpp"
#include "fairview/fairness/metrics.hpp"
#include "fairview/semantics/views.hpp"

namespace fairview::classifier {

struct TrainConfig {
  double alpha = 2.0;     // neighbor-loss weight, paper default
  int m = 7;              // neighbors used per sample, paper default
  int lazy_n = 2;         // regularization period, paper default
  NeighborMetric metric = NeighborMetric::js;
  bool mt_enabled = false;
  double mt_weight = 0.5;
  bool edl_enabled = false;
  evidential::AnnealSchedule kl_schedule;  // off by default
  double label_smoothing = 0.1;  // paper default
  bool backprop_views = false;
  int epochs = 12;
  int batch = 64;
  double lr = 2e-3;
  double lr_decay = 0.1;       // multiplier applied once
  double lr_decay_at = 0.75;   // fraction of epochs
  bool normalize_by_batch = true;
  std::uint64_t seed = 1;
  std::vector<std::size_t> channels = {16, 32, 64, 128};
  std::size_t embed_dim = 128;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
};

struct ClassifierBundle {
  TrainConfig cfg;
  ClassifierNet<float> net;
  json manifest = json::object();

  void save(const std::filesystem::path& dir);
  static ClassifierBundle load(const std::filesystem::path& dir);
  std::string checksum() { return net.state_checksum(); }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_dob = 0.0;
  double val_ser = 0.0;
};

struct TrainClassifierResult {
  ClassifierBundle bundle;  // best-validation-accuracy snapshot
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

/// Structured training loop. `views` may be null (plain baseline). When given,
/// its provenance must match the training dataset. Ground truth for the
/// per-epoch validation metrics is the pre-noise label.
TrainClassifierResult train_classifier(const datagen::Dataset& train,
                                       const semantics::ViewCache* views,
                                       const datagen::Dataset& val, const TrainConfig& cfg,
                                       int groups);

enum class EvalLabels { observed, prenoise };

std::vector<fairness::PredictionRecord> predict_records(ClassifierBundle& bundle,
                                                        const datagen::Dataset& ds,
                                                        EvalLabels labels,
                                                        std::size_t chunk = 256);

}  // namespace fairview::classifier
