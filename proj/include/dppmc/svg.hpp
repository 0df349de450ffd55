#pragma once
// Self-contained SVG plots of summary curves: one median polyline per method
// over a translucent interquartile band. Output is deterministic down to the
// byte for a given input, so plots can be diffed and cached by content.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dppmc/common.hpp"
#include "dppmc/experiment.hpp"

namespace dppmc {

struct PlotOptions {
  int width = 640;
  int height = 400;
  bool log_y = true;  // falls back to linear when values are not positive
  std::string x_label = "iteration";
  std::string y_label = "objective";
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline const char* plot_color(std::size_t index) {
  static const char* palette[] = {"#1b6ca8", "#c2452d", "#3a8a4d",
                                  "#7a4fa3", "#b8860b", "#3d7a7a"};
  return palette[index % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace detail

// Renders the summary rows to an SVG string. Methods are drawn in sorted
// name order; a series with a single point gets a circle marker so it stays
// visible without a polyline.
inline std::string render_curves(const std::vector<SummaryRow>& summary,
                                 const PlotOptions& opt = {}) {
  if (summary.empty()) throw Error("render_curves: no summary rows");

  std::map<std::string, std::vector<SummaryRow>> series;
  for (const SummaryRow& r : summary) series[r.method].push_back(r);
  for (auto& [name, rows] : series)
    std::sort(rows.begin(), rows.end(),
              [](const SummaryRow& a, const SummaryRow& b) {
                return a.iteration < b.iteration;
              });

  bool log_y = opt.log_y;
  for (const SummaryRow& r : summary)
    if (!(r.q1 > 0.0) || !(r.median > 0.0) || !(r.q3 > 0.0)) log_y = false;

  const auto y_val = [&](double v) { return log_y ? std::log10(v) : v; };

  double x0 = summary.front().iteration, x1 = x0;
  double y0 = y_val(summary.front().q1), y1 = y0;
  for (const SummaryRow& r : summary) {
    x0 = std::min(x0, static_cast<double>(r.iteration));
    x1 = std::max(x1, static_cast<double>(r.iteration));
    y0 = std::min({y0, y_val(r.q1), y_val(r.median)});
    y1 = std::max({y1, y_val(r.q3), y_val(r.median)});
  }
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }

  const double ml = 64, mr = 16, mt = 18, mb = 44;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  const auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double v) {
    return mt + ph - (y_val(v) - y0) / (y1 - y0) * ph;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(opt.width) + "\" height=\"" +
         std::to_string(opt.height) + "\" viewBox=\"0 0 " +
         std::to_string(opt.width) + " " + std::to_string(opt.height) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  // axes frame
  svg += "<rect x=\"" + detail::svg_num(ml) + "\" y=\"" + detail::svg_num(mt) +
         "\" width=\"" + detail::svg_num(pw) + "\" height=\"" +
         detail::svg_num(ph) +
         "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";

  // ticks: five per axis at even fractions of the data range
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double gx = px(fx);
    svg += "<line x1=\"" + detail::svg_num(gx) + "\" y1=\"" +
           detail::svg_num(mt + ph) + "\" x2=\"" + detail::svg_num(gx) +
           "\" y2=\"" + detail::svg_num(mt + ph + 5) +
           "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + detail::svg_num(gx) + "\" y=\"" +
           detail::svg_num(mt + ph + 18) +
           "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">" +
           detail::svg_num(fx) + "</text>\n";

    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double value = log_y ? std::pow(10.0, fy) : fy;
    const double gy = mt + ph - (fy - y0) / (y1 - y0) * ph;
    svg += "<line x1=\"" + detail::svg_num(ml - 5) + "\" y1=\"" +
           detail::svg_num(gy) + "\" x2=\"" + detail::svg_num(ml) +
           "\" y2=\"" + detail::svg_num(gy) +
           "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + detail::svg_num(ml - 8) + "\" y=\"" +
           detail::svg_num(gy + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\">" +
           detail::svg_num(value) + "</text>\n";
  }

  // axis labels
  svg += "<text x=\"" + detail::svg_num(ml + pw / 2) + "\" y=\"" +
         detail::svg_num(static_cast<double>(opt.height) - 8) +
         "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\">" +
         opt.x_label + "</text>\n";
  svg += "<text x=\"14\" y=\"" + detail::svg_num(mt + ph / 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         detail::svg_num(mt + ph / 2) + ")\">" + opt.y_label +
         (log_y ? " (log)" : "") + "</text>\n";

  std::size_t index = 0;
  for (const auto& [name, rows] : series) {
    const char* color = detail::plot_color(index);

    if (rows.size() > 1) {
      // interquartile band: q3 forward, q1 back
      std::string band = "<path d=\"M";
      for (const SummaryRow& r : rows)
        band += " " + detail::svg_num(px(r.iteration)) + " " +
                detail::svg_num(py(r.q3));
      band += " L";
      for (auto it = rows.rbegin(); it != rows.rend(); ++it)
        band += " " + detail::svg_num(px(it->iteration)) + " " +
                detail::svg_num(py(it->q1));
      band += " Z\" fill=\"" + std::string(color) +
              "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
      svg += band;

      std::string line = "<polyline points=\"";
      for (const SummaryRow& r : rows)
        line += detail::svg_num(px(r.iteration)) + "," +
                detail::svg_num(py(r.median)) + " ";
      line.pop_back();
      line += "\" fill=\"none\" stroke=\"" + std::string(color) +
              "\" stroke-width=\"1.8\"/>\n";
      svg += line;
    } else {
      const SummaryRow& r = rows.front();
      svg += "<line x1=\"" + detail::svg_num(px(r.iteration)) + "\" y1=\"" +
             detail::svg_num(py(r.q1)) + "\" x2=\"" +
             detail::svg_num(px(r.iteration)) + "\" y2=\"" +
             detail::svg_num(py(r.q3)) + "\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.2\" stroke-opacity=\"0.5\"/>\n";
      svg += "<circle cx=\"" + detail::svg_num(px(r.iteration)) + "\" cy=\"" +
             detail::svg_num(py(r.median)) + "\" r=\"3.5\" fill=\"" +
             std::string(color) + "\"/>\n";
    }

    // legend entry
    const double ly = mt + 14 + 16 * static_cast<double>(index);
    svg += "<rect x=\"" + detail::svg_num(ml + pw - 150) + "\" y=\"" +
           detail::svg_num(ly - 8) +
           "\" width=\"12\" height=\"8\" fill=\"" + std::string(color) +
           "\"/>\n";
    svg += "<text x=\"" + detail::svg_num(ml + pw - 134) + "\" y=\"" +
           detail::svg_num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + name +
           "</text>\n";
    ++index;
  }

  svg += "</svg>\n";
  return svg;
}

inline void save_curves(const std::string& path,
                        const std::vector<SummaryRow>& summary,
                        const PlotOptions& opt = {}) {
  std::ofstream out(path);
  if (!out) throw Error("save_curves: cannot open " + path);
  out << render_curves(summary, opt);
}

}  // namespace dppmc
