// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fairview/pipeline/stages.hpp"

namespace fairview::pipeline {

struct AblationSpec {
  std::string axis;                 // neighbor_size | lazy_n | distance_metric | backprop_views
  std::vector<std::string> values;  // parsed per axis
  std::vector<std::uint64_t> seeds;

  void validate() const;
};

struct AblationRun {
  std::string value;
  std::uint64_t seed = 0;
  double acc = 0.0, dob = 0.0, ser = 0.0;
  std::string checkpoint_checksum;
};

struct AblationRow {
  std::string value;
  std::size_t n_seeds = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double dob_mean = 0.0, dob_std = 0.0;
  double ser_mean = 0.0, ser_std = 0.0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> rows;
};

/// Trains one classifier per (value, seed) against the shared upstream
/// artifacts of `base` (built on demand), evaluates each on the test split,
/// and writes ablation_runs.csv + ablation_summary.csv into the run dir.
AblationResult run_ablation(const ExperimentConfig& base, const AblationSpec& spec);

}  // namespace fairview::pipeline
