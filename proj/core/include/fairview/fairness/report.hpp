// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "fairview/csv.hpp"
#include "fairview/fairness/metrics.hpp"

namespace fairview::fairness {

/// Writes fairness.csv (cells + summary rows, six decimals), report.json
/// (exact values), and sweep.csv when the sweep is non-empty.
void write_report_files(const std::filesystem::path& dir, const FairnessReport& report,
                        const std::vector<RejectSweepRow>& sweep);

FairnessReport read_report_csv(const std::filesystem::path& path);
std::vector<RejectSweepRow> read_sweep_csv(const std::filesystem::path& path);

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path);

}  // namespace fairview::fairness
