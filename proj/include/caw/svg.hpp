// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "caw/error.hpp"

namespace caw {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Minimal static line chart; no display dependency, CSV stays canonical.
inline std::string render_line_plot(const std::string& title, const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<PlotSeries>& series) {
  const double w = 640, h = 420, ml = 64, mr = 24, mt = 40, mb = 48;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 1.0;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin >= xmax) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymin >= ymax) ymax = ymin + 1.0;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::string out;
  char buf[256];
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">%s</text>\n",
                w / 2, title.c_str());
  out += buf;
  // axes
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, h - mb,
                w - mr, h - mb);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, mt, ml,
                h - mb);
  out += buf;
  // ticks
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.2g</text>\n", px(xv),
                  h - mb + 18, xv);
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n", ml - 8,
                  py(yv) + 4, yv);
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"#ddd\"/>\n", ml, py(yv),
                  w - mr, py(yv));
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n", (ml + w - mr) / 2,
                h - 10, xlabel.c_str());
  out += buf;
  std::snprintf(
      buf, sizeof buf,
      "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">%s</text>\n",
      (mt + h - mb) / 2, (mt + h - mb) / 2, ylabel.c_str());
  out += buf;
  // series
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string pts;
    for (auto [x, y] : series[s].points) {
      std::snprintf(buf, sizeof buf, "%g,%g ", px(x), py(y));
      pts += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"%s\"/>\n",
                  colors[s % 4], pts.c_str());
    out += buf;
    for (auto [x, y] : series[s].points) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%g\" cy=\"%g\" r=\"3\" fill=\"%s\"/>\n", px(x),
                    py(y), colors[s % 4]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", w - mr - 120,
                  mt + 16.0 * (s + 1), colors[s % 4], series[s].label.c_str());
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  out << content;
}

}  // namespace caw
