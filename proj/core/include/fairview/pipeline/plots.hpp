// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fairview::pipeline {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Deterministic SVG line chart (plots are derived artifacts; identical CSVs
/// always yield byte-identical images).
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::vector<Series>& series, int width = 640,
                              int height = 360);

std::string render_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<double>& values, int width = 640,
                             int height = 360);

/// Renders eval/sweep.csv and eval/fairness.csv of a run directory into
/// plots/*.svg. Missing files or renamed columns raise schema errors naming
/// the offending file or column.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir);

}  // namespace fairview::pipeline
