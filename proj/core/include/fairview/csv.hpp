// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fairview {

/// Simple CSV table: one header row, then homogeneous string cells.
/// Numeric columns are written with exactly six decimals.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws schema_mismatch
  void require_columns(const std::vector<std::string>& names) const;
};

std::string format_fixed6(double v);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace fairview
