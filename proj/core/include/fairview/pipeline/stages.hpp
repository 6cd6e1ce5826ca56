// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "fairview/pipeline/config.hpp"

namespace fairview::pipeline {

inline const std::vector<std::string> kStageOrder = {
    "datagen", "train-gan", "train-encoder", "make-views", "train-cls", "eval"};

struct StageOutcome {
  std::string name;
  bool skipped = false;
};

/// Executes pipeline stages against one artifact directory, skipping stages
/// whose configuration fingerprint and artifact checksums are unchanged.
/// run_manifest.json links every artifact checksum to its producing stage.
class Runner {
 public:
  explicit Runner(ExperimentConfig cfg);

  /// All stages in order. force rebuilds everything; with rebuild_stale =
  /// false a stale stage raises stale_artifact instead of rebuilding.
  std::vector<StageOutcome> run_pipeline(bool force = false, bool rebuild_stale = true);

  StageOutcome run_stage(const std::string& name, bool force);
  bool stage_fresh(const std::string& name) const;

  const std::filesystem::path& out_dir() const { return out_; }

  /// Recomputes every artifact checksum recorded in the run manifest and
  /// verifies the input/output chain between stages, including the deep
  /// provenance fields embedded in the view cache and classifier manifests.
  static void validate_provenance(const std::filesystem::path& out_dir);

 private:
  void record_stage(const std::string& name, const json& inputs, const json& outputs);
  json manifest_stage(const std::string& name) const;
  json current_outputs_of(const std::string& name) const;

  void do_datagen();
  void do_train_gan();
  void do_train_encoder();
  void do_make_views();
  void do_train_cls();
  void do_eval();

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  json manifest_;
};

/// Checksum of an artifact path: SHA-256 of a file, or of the container's
/// checksum index for a directory.
std::string artifact_checksum(const std::filesystem::path& path);

}  // namespace fairview::pipeline
