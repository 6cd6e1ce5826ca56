// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairview::fairness {

struct PredictionRecord {
  std::int64_t sample_id = 0;
  int predicted = 0;
  std::vector<double> probs;              // sums to 1
  std::optional<double> uncertainty;      // present only for evidential heads
  int y = 0;
  int g = 0;
};

struct CellAccuracy {
  int g = 0;
  int y = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy_pct = 0.0;
};

struct GroupAccuracyTable {
  std::vector<CellAccuracy> cells;  // ordered by (g, y); only non-empty cells
  double macro_pct = 0.0;           // unweighted mean of cell accuracies
  double micro_pct = 0.0;           // total correct / total count
  std::size_t total = 0;
  std::size_t total_correct = 0;
};

struct FairnessReport {
  GroupAccuracyTable table;
  double dob = 0.0;
  double dob_weighted = 0.0;
  double ser = 0.0;
  std::string config_fingerprint;
};

struct RejectSweepRow {
  double tau = 0.0;
  double coverage = 0.0;
  std::size_t accepted = 0;
  double accuracy_pct = 0.0;  // NaN when undefined
  double dob = 0.0;           // NaN when undefined
  std::string flags;          // "", "all_rejected", "excluded_cells:<n>"
};

GroupAccuracyTable group_accuracies(const std::vector<PredictionRecord>& records);

/// Population (divisor N) standard deviation of cell accuracies.
double dob(const std::vector<double>& accuracies);

/// Weighted standard deviation: sqrt(sum w (a - mean_w)^2 / sum w).
double dob_weighted(const std::vector<double>& accuracies, const std::vector<double>& weights);

/// 100 * min(accuracies) / max(accuracies).
double ser(const std::vector<double>& accuracies);

FairnessReport make_report(const std::vector<PredictionRecord>& records,
                           const std::string& config_fingerprint);

/// Thresholds must be strictly descending. A record is accepted iff u <= tau.
std::vector<RejectSweepRow> reject_sweep(const std::vector<PredictionRecord>& records,
                                         const std::vector<double>& thresholds);

std::vector<double> default_threshold_grid(double step = 0.05);

std::vector<double> cell_accuracies(const GroupAccuracyTable& table);
std::vector<double> cell_weights(const GroupAccuracyTable& table);

}  // namespace fairview::fairness
