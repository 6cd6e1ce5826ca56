// SPDX-License-Identifier: Apache-2.0
#include "fairview/fairness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fairview/common.hpp"

namespace fairview::fairness {

GroupAccuracyTable group_accuracies(const std::vector<PredictionRecord>& records) {
  require(!records.empty(), Errc::config_invalid, "group_accuracies on empty records");
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> counts;  // (g,y) -> (n, correct)
  for (const auto& r : records) {
    auto& [n, correct] = counts[{r.g, r.y}];
    ++n;
    if (r.predicted == r.y) ++correct;
  }
  GroupAccuracyTable table;
  double acc_sum = 0.0;
  for (const auto& [key, val] : counts) {
    CellAccuracy cell;
    cell.g = key.first;
    cell.y = key.second;
    cell.count = val.first;
    cell.correct = val.second;
    cell.accuracy_pct = 100.0 * static_cast<double>(val.second) / static_cast<double>(val.first);
    acc_sum += cell.accuracy_pct;
    table.total += cell.count;
    table.total_correct += cell.correct;
    table.cells.push_back(cell);
  }
  table.macro_pct = acc_sum / static_cast<double>(table.cells.size());
  table.micro_pct = 100.0 * static_cast<double>(table.total_correct) /
                    static_cast<double>(table.total);
  return table;
}

double dob(const std::vector<double>& accuracies) {
  require(accuracies.size() >= 2, Errc::config_invalid, "DoB needs at least two cells");
  double mean = 0.0;
  for (auto a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  double var = 0.0;
  for (auto a : accuracies) var += (a - mean) * (a - mean);
  var /= static_cast<double>(accuracies.size());
  return std::sqrt(var);
}

double dob_weighted(const std::vector<double>& accuracies, const std::vector<double>& weights) {
  require(accuracies.size() >= 2, Errc::config_invalid, "DoB needs at least two cells");
  require(accuracies.size() == weights.size(), Errc::config_invalid,
          "weights must match accuracies");
  double wsum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    require(weights[i] > 0.0, Errc::config_invalid, "weights must be positive");
    wsum += weights[i];
    mean += weights[i] * accuracies[i];
  }
  mean /= wsum;
  double var = 0.0;
  for (std::size_t i = 0; i < accuracies.size(); ++i)
    var += weights[i] * (accuracies[i] - mean) * (accuracies[i] - mean);
  return std::sqrt(var / wsum);
}

double ser(const std::vector<double>& accuracies) {
  require(!accuracies.empty(), Errc::config_invalid, "SeR on empty accuracies");
  const auto [mn, mx] = std::minmax_element(accuracies.begin(), accuracies.end());
  require(*mx > 0.0, Errc::config_invalid, "SeR undefined when best accuracy is 0");
  return 100.0 * (*mn / *mx);
}

std::vector<double> cell_accuracies(const GroupAccuracyTable& table) {
  std::vector<double> out;
  out.reserve(table.cells.size());
  for (const auto& c : table.cells) out.push_back(c.accuracy_pct);
  return out;
}

std::vector<double> cell_weights(const GroupAccuracyTable& table) {
  std::vector<double> out;
  out.reserve(table.cells.size());
  for (const auto& c : table.cells) out.push_back(static_cast<double>(c.count));
  return out;
}

FairnessReport make_report(const std::vector<PredictionRecord>& records,
                           const std::string& config_fingerprint) {
  FairnessReport report;
  report.table = group_accuracies(records);
  const auto accs = cell_accuracies(report.table);
  report.dob = dob(accs);
  report.dob_weighted = dob_weighted(accs, cell_weights(report.table));
  report.ser = ser(accs);
  report.config_fingerprint = config_fingerprint;
  return report;
}

std::vector<RejectSweepRow> reject_sweep(const std::vector<PredictionRecord>& records,
                                         const std::vector<double>& thresholds) {
  require(!records.empty(), Errc::config_invalid, "reject_sweep on empty records");
  for (const auto& r : records)
    require(r.uncertainty.has_value(), Errc::config_invalid,
            "reject_sweep requires uncertainty on every record (evidential head only)");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    require(thresholds[i] < thresholds[i - 1], Errc::config_invalid,
            "thresholds must be strictly descending");

  // Count non-empty (g, y) cells of the full set; rejection can only empty them.
  const auto full_cells = group_accuracies(records).cells.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<RejectSweepRow> rows;
  for (const double tau : thresholds) {
    std::vector<PredictionRecord> accepted;
    for (const auto& r : records)
      if (*r.uncertainty <= tau) accepted.push_back(r);
    RejectSweepRow row;
    row.tau = tau;
    row.accepted = accepted.size();
    row.coverage = static_cast<double>(accepted.size()) / static_cast<double>(records.size());
    if (accepted.empty()) {
      row.accuracy_pct = nan;
      row.dob = nan;
      row.flags = "all_rejected";
    } else {
      const auto table = group_accuracies(accepted);
      row.accuracy_pct = table.micro_pct;
      if (table.cells.size() >= 2) {
        row.dob = dob(cell_accuracies(table));
      } else {
        row.dob = nan;
      }
      const auto excluded = full_cells - table.cells.size();
      if (excluded > 0) row.flags = "excluded_cells:" + std::to_string(excluded);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> default_threshold_grid(double step) {
  require(step > 0.0 && step <= 1.0, Errc::config_invalid, "tau step must be in (0, 1]");
  std::vector<double> taus;
  const int n = static_cast<int>(std::round(1.0 / step));
  for (int i = n; i >= 1; --i) taus.push_back(step * i);
  return taus;
}

}  // namespace fairview::fairness
