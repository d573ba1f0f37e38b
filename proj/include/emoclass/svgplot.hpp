#pragma once

#include <string>
#include <vector>

namespace emoclass {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart: axes with ticks, a legend, one polyline per
// series. Output is deterministic for identical inputs.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotSeries>& series,
                              int width = 640, int height = 440);

}  // namespace emoclass
