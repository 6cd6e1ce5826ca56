// SPDX-License-Identifier: Apache-2.0
#include "fairview/pipeline/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fairview/common.hpp"
#include "fairview/csv.hpp"
#include "fairview/fairness/report.hpp"

namespace fairview::pipeline {

namespace fs = std::filesystem;

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Frame {
  double x0, x1, y0, y1;    // data ranges
  int px0, px1, py0, py1;   // pixel box (py0 = top)
  double sx(double x) const {
    return px0 + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (px1 - px0);
  }
  double sy(double y) const {
    return py1 - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (py1 - py0);
  }
};

void axes(std::ostringstream& svg, const Frame& f, const std::string& x_label) {
  svg << "<rect x='" << f.px0 << "' y='" << f.py0 << "' width='" << (f.px1 - f.px0)
      << "' height='" << (f.py1 - f.py0) << "' fill='none' stroke='#333'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double tx = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double ty = f.y0 + (f.y1 - f.y0) * i / 4.0;
    svg << "<text x='" << fmt(f.sx(tx)) << "' y='" << (f.py1 + 16)
        << "' font-size='10' text-anchor='middle' fill='#333'>" << fmt(tx) << "</text>\n";
    svg << "<text x='" << (f.px0 - 6) << "' y='" << fmt(f.sy(ty) + 3)
        << "' font-size='10' text-anchor='end' fill='#333'>" << fmt(ty) << "</text>\n";
  }
  svg << "<text x='" << (f.px0 + (f.px1 - f.px0) / 2) << "' y='" << (f.py1 + 32)
      << "' font-size='11' text-anchor='middle' fill='#111'>" << x_label << "</text>\n";
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::vector<Series>& series, int width, int height) {
  require(!series.empty(), Errc::config_invalid, "line chart needs at least one series");
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), Errc::config_invalid, "series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x0 > x1) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x0 == x1) { x0 -= 0.5; x1 += 0.5; }
  if (y0 == y1) { y0 -= 0.5; y1 += 0.5; }

  Frame f{x0, x1, y0, y1, 56, width - 16, 28, height - 44};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='18' font-size='13' text-anchor='middle' "
      << "fill='#111'>" << title << "</text>\n";
  axes(svg, f, x_label);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 5];
    std::ostringstream pts;
    std::size_t drawn = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      pts << fmt(f.sx(s.x[i])) << "," << fmt(f.sy(s.y[i])) << " ";
      ++drawn;
    }
    if (drawn > 1) {
      svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
          << "' stroke-width='1.5'/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      svg << "<circle cx='" << fmt(f.sx(s.x[i])) << "' cy='" << fmt(f.sy(s.y[i]))
          << "' r='2.2' fill='" << color << "'/>\n";
    }
    svg << "<text x='" << (f.px0 + 8) << "' y='" << (f.py0 + 14 + 14 * static_cast<int>(si))
        << "' font-size='11' fill='" << color << "'>" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<double>& values, int width, int height) {
  require(labels.size() == values.size() && !labels.empty(), Errc::config_invalid,
          "bar chart labels/values mismatch");
  double y1 = *std::max_element(values.begin(), values.end());
  if (y1 <= 0) y1 = 1;
  Frame f{0, static_cast<double>(labels.size()), 0, y1, 56, width - 16, 28, height - 44};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='18' font-size='13' text-anchor='middle' "
      << "fill='#111'>" << title << "</text>\n";
  svg << "<rect x='" << f.px0 << "' y='" << f.py0 << "' width='" << (f.px1 - f.px0)
      << "' height='" << (f.py1 - f.py0) << "' fill='none' stroke='#333'/>\n";
  const double slot = static_cast<double>(f.px1 - f.px0) / labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double bx = f.px0 + slot * i + slot * 0.15;
    const double by = f.sy(values[i]);
    svg << "<rect x='" << fmt(bx) << "' y='" << fmt(by) << "' width='" << fmt(slot * 0.7)
        << "' height='" << fmt(f.py1 - by) << "' fill='" << kPalette[i % 5] << "'/>\n";
    svg << "<text x='" << fmt(bx + slot * 0.35) << "' y='" << (f.py1 + 16)
        << "' font-size='10' text-anchor='middle' fill='#333'>" << labels[i] << "</text>\n";
    svg << "<text x='" << fmt(bx + slot * 0.35) << "' y='" << fmt(by - 4)
        << "' font-size='9' text-anchor='middle' fill='#333'>" << fmt(values[i]) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double ty = y1 * i / 4.0;
    svg << "<text x='" << (f.px0 - 6) << "' y='" << fmt(f.sy(ty) + 3)
        << "' font-size='10' text-anchor='end' fill='#333'>" << fmt(ty) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> emit_plots(const fs::path& run_dir) {
  const fs::path eval_dir = run_dir / "eval";
  require(fs::exists(eval_dir / "fairness.csv"), Errc::stage_failure,
          "missing CSV: " + (eval_dir / "fairness.csv").string());
  fs::create_directories(run_dir / "plots");
  std::vector<fs::path> written;

  const auto report = fairness::read_report_csv(eval_dir / "fairness.csv");
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& c : report.table.cells) {
    labels.push_back("g" + std::to_string(c.g) + "/y" + std::to_string(c.y));
    values.push_back(c.accuracy_pct);
  }
  {
    const fs::path p = run_dir / "plots" / "group_accuracy.svg";
    std::ofstream out(p, std::ios::trunc);
    out << render_bar_chart("Per-cell accuracy (%)", labels, values);
    written.push_back(p);
  }

  if (fs::exists(eval_dir / "sweep.csv")) {
    const auto sweep = fairness::read_sweep_csv(eval_dir / "sweep.csv");
    Series cov{"coverage", {}, {}}, acc{"accuracy %", {}, {}}, dob{"DoB", {}, {}};
    for (const auto& row : sweep) {
      cov.x.push_back(row.tau);
      cov.y.push_back(row.coverage);
      acc.x.push_back(row.tau);
      acc.y.push_back(row.accuracy_pct);
      dob.x.push_back(row.tau);
      dob.y.push_back(row.dob);
    }
    const std::vector<std::pair<std::string, Series>> charts = {
        {"sweep_coverage.svg", cov}, {"sweep_accuracy.svg", acc}, {"sweep_dob.svg", dob}};
    for (const auto& [name, series] : charts) {
      const fs::path p = run_dir / "plots" / name;
      std::ofstream out(p, std::ios::trunc);
      out << render_line_chart("Behaviour vs uncertainty threshold", "tau", {series});
      written.push_back(p);
    }
  }
  return written;
}

}  // namespace fairview::pipeline
