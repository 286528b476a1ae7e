#pragma once

#include <string>
#include <vector>

namespace flowlab {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional confidence band; empty or same length as y.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// Self-contained SVG line chart. Non-finite points are skipped.
std::string render_svg(const Plot& plot);

}  // namespace flowlab
