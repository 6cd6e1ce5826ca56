// SPDX-License-Identifier: Apache-2.0
#include "fairview/fairness/report.hpp"

#include <cmath>

#include "fairview/array_store.hpp"
#include "fairview/common.hpp"

namespace fairview::fairness {

namespace {

std::string num_or_nan(double v) { return std::isnan(v) ? "nan" : format_fixed6(v); }

double parse_num(const std::string& s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

void write_report_files(const std::filesystem::path& dir, const FairnessReport& report,
                        const std::vector<RejectSweepRow>& sweep) {
  std::filesystem::create_directories(dir);

  CsvTable table;
  table.header = {"group", "class", "count", "correct", "accuracy"};
  for (const auto& c : report.table.cells)
    table.rows.push_back({std::to_string(c.g), std::to_string(c.y), std::to_string(c.count),
                          std::to_string(c.correct), format_fixed6(c.accuracy_pct)});
  table.rows.push_back({"macro_avg", "", "", "", format_fixed6(report.table.macro_pct)});
  table.rows.push_back({"micro_avg", "", "", "", format_fixed6(report.table.micro_pct)});
  table.rows.push_back({"dob", "", "", "", format_fixed6(report.dob)});
  table.rows.push_back({"dob_weighted", "", "", "", format_fixed6(report.dob_weighted)});
  table.rows.push_back({"ser", "", "", "", format_fixed6(report.ser)});
  write_csv(dir / "fairness.csv", table);

  json j;
  j["config_fingerprint"] = report.config_fingerprint;
  j["macro_avg"] = report.table.macro_pct;
  j["micro_avg"] = report.table.micro_pct;
  j["dob"] = report.dob;
  j["dob_weighted"] = report.dob_weighted;
  j["ser"] = report.ser;
  json cells = json::array();
  for (const auto& c : report.table.cells)
    cells.push_back({{"group", c.g},
                     {"class", c.y},
                     {"count", c.count},
                     {"correct", c.correct},
                     {"accuracy", c.accuracy_pct}});
  j["cells"] = cells;
  write_json_file(dir / "report.json", j);

  if (!sweep.empty()) {
    CsvTable sw;
    sw.header = {"tau", "coverage", "accuracy", "dob", "flags"};
    for (const auto& row : sweep)
      sw.rows.push_back({format_fixed6(row.tau), format_fixed6(row.coverage),
                         num_or_nan(row.accuracy_pct), num_or_nan(row.dob), row.flags});
    write_csv(dir / "sweep.csv", sw);
  }
}

FairnessReport read_report_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  table.require_columns({"group", "class", "count", "correct", "accuracy"});
  FairnessReport report;
  for (const auto& row : table.rows) {
    const std::string& key = row[0];
    const double value = parse_num(row[4]);
    if (key == "macro_avg") {
      report.table.macro_pct = value;
    } else if (key == "micro_avg") {
      report.table.micro_pct = value;
    } else if (key == "dob") {
      report.dob = value;
    } else if (key == "dob_weighted") {
      report.dob_weighted = value;
    } else if (key == "ser") {
      report.ser = value;
    } else {
      CellAccuracy cell;
      cell.g = std::stoi(row[0]);
      cell.y = std::stoi(row[1]);
      cell.count = static_cast<std::size_t>(std::stoull(row[2]));
      cell.correct = static_cast<std::size_t>(std::stoull(row[3]));
      cell.accuracy_pct = value;
      report.table.total += cell.count;
      report.table.total_correct += cell.correct;
      report.table.cells.push_back(cell);
    }
  }
  return report;
}

std::vector<RejectSweepRow> read_sweep_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  table.require_columns({"tau", "coverage", "accuracy", "dob", "flags"});
  const auto c_tau = table.column("tau"), c_cov = table.column("coverage");
  const auto c_acc = table.column("accuracy"), c_dob = table.column("dob");
  const auto c_flags = table.column("flags");
  std::vector<RejectSweepRow> rows;
  for (const auto& r : table.rows) {
    RejectSweepRow row;
    row.tau = parse_num(r[c_tau]);
    row.coverage = parse_num(r[c_cov]);
    row.accuracy_pct = parse_num(r[c_acc]);
    row.dob = parse_num(r[c_dob]);
    row.flags = r[c_flags];
    rows.push_back(row);
  }
  return rows;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& records) {
  CsvTable table;
  const bool with_u = !records.empty() && records.front().uncertainty.has_value();
  table.header = {"sample_id", "predicted", "p0", "p1", "y", "g"};
  if (with_u) table.header.push_back("u");
  for (const auto& r : records) {
    std::vector<std::string> row = {std::to_string(r.sample_id), std::to_string(r.predicted),
                                    format_fixed6(r.probs.at(0)), format_fixed6(r.probs.at(1)),
                                    std::to_string(r.y), std::to_string(r.g)};
    if (with_u) row.push_back(format_fixed6(*r.uncertainty));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  table.require_columns({"sample_id", "predicted", "p0", "p1", "y", "g"});
  bool with_u = true;
  try {
    table.column("u");
  } catch (const Error&) {
    with_u = false;
  }
  std::vector<PredictionRecord> records;
  for (const auto& r : table.rows) {
    PredictionRecord rec;
    rec.sample_id = std::stoll(r[table.column("sample_id")]);
    rec.predicted = std::stoi(r[table.column("predicted")]);
    rec.probs = {parse_num(r[table.column("p0")]), parse_num(r[table.column("p1")])};
    rec.y = std::stoi(r[table.column("y")]);
    rec.g = std::stoi(r[table.column("g")]);
    if (with_u) rec.uncertainty = parse_num(r[table.column("u")]);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fairview::fairness
