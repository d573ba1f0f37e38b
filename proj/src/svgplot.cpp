#include "emoclass/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "emoclass/util.hpp"

namespace emoclass {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotSeries>& series,
                              int width, int height) {
  if (series.empty()) throw UsageError("a chart needs at least one series");
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size()) throw UsageError("series x/y lengths differ");
    if (s.x.empty()) throw UsageError("series '" + s.name + "' is empty");
  }

  double x_min = series[0].x[0], x_max = x_min;
  double y_min = series[0].y[0], y_max = y_min;
  for (const PlotSeries& s : series) {
    for (double v : s.x) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (double v : s.y) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (x_min == x_max) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_min == y_max) {
    y_min -= 0.5;
    y_max += 0.5;
  }

  const double ml = 64, mr = 18, mt = 36, mb = 52;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;
  auto sx = [&](double v) { return ml + (v - x_min) / (x_max - x_min) * pw; };
  auto sy = [&](double v) { return mt + ph - (v - y_min) / (y_max - y_min) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title) << "</text>\n";

  // Axes and ticks.
  svg << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(ml + pw)
      << "\" y2=\"" << fmt(mt + ph) << "\"/>\n";
  svg << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(ml) << "\" y2=\""
      << fmt(mt + ph) << "\"/>\n";
  svg << "</g>\n";
  const int ticks = 5;
  svg << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\">\n";
  for (int t = 0; t <= ticks; ++t) {
    double fx = x_min + (x_max - x_min) * t / ticks;
    double fy = y_min + (y_max - y_min) * t / ticks;
    double px = sx(fx);
    double py = sy(fy);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << fmt(mt + ph + 4) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(mt + ph + 16)
        << "\" text-anchor=\"middle\">" << fmt(fx, "%.3g") << "</text>\n";
    svg << "<line x1=\"" << fmt(ml - 4) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(ml)
        << "\" y2=\"" << fmt(py) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << fmt(ml - 7) << "\" y=\"" << fmt(py + 3) << "\" text-anchor=\"end\">"
        << fmt(fy, "%.3g") << "</text>\n";
  }
  svg << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(mt + ph + 34)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape_xml(x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt(mt + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\""
      << " transform=\"rotate(-90 16 " << fmt(mt + ph / 2) << ")\">" << escape_xml(y_label)
      << "</text>\n";
  svg << "</g>\n";

  // Series polylines.
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (i > 0) svg << ' ';
      svg << fmt(sx(series[s].x[i])) << ',' << fmt(sy(series[s].y[i]));
    }
    svg << "\"/>\n";
  }

  // Legend, top-right inside the plot area.
  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    double ly = mt + 10 + 15 * static_cast<double>(s);
    double lx = ml + pw - 150;
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 18)
        << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << kPalette[s % kPaletteSize]
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(lx + 23) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape_xml(series[s].name) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace emoclass
