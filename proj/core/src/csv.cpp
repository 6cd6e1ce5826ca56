// SPDX-License-Identifier: Apache-2.0
#include "fairview/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fairview/common.hpp"

namespace fairview {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(Errc::schema_mismatch, "missing CSV column: " + name);
}

void CsvTable::require_columns(const std::vector<std::string>& names) const {
  for (const auto& n : names) column(n);
}

std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::stage_failure, "cannot write " + path.string());
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    require(row.size() == table.header.size(), Errc::schema_mismatch,
            "CSV row width mismatch in " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::stage_failure, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  require(!table.header.empty(), Errc::schema_mismatch, "empty CSV: " + path.string());
  return table;
}

}  // namespace fairview
