#include "mmu/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mmu {
namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";
}

std::string axes(double x0, double x1, double y0, double y1, const std::string& xl, const std::string& yl,
                 bool x_ticks) {
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  std::string s = "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
                  "\" y2=\"" + num(kTop + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop + ph) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double py = kTop + ph - t * ph;
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
         num(y0 + t * (y1 - y0)) + "</text>\n";
    if (x_ticks)
      s += "<text x=\"" + num(kLeft + t * pw) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
           num(x0 + t * (x1 - x0)) + "</text>\n";
  }
  s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kH - 10) + "\" text-anchor=\"middle\">" + escape(xl) +
       "</text>\n";
  s += "<text transform=\"translate(16," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(yl) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    s += "<rect x=\"" + num(kW - kRight + 15) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
         kColors[i % 7] + "\"/>\n<text x=\"" + num(kW - kRight + 32) + "\" y=\"" + num(y + 1) + "\">" +
         escape(names[i]) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
  double x0 = INFINITY, x1 = -INFINITY, y1 = 0.0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 <= 0.0) y1 = 1.0;
  y1 *= 1.05;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  std::string out = header(title) + axes(x0, x1, 0.0, y1, x_label, y_label, true);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].name);
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      const double px = kLeft + (x - x0) / (x1 - x0) * pw, py = kTop + ph - y / y1 * ph;
      pts += num(px) + "," + num(py) + " ";
      out += "<circle cx=\"" + num(px) + "\" cy=\"" + num(py) + "\" r=\"3\" fill=\"" + kColors[i % 7] + "\"/>\n";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(kColors[i % 7]) + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
  }
  return out + legend(names) + "</svg>\n";
}

std::string svg_bar_chart(const std::vector<std::string>& categories, const std::vector<std::string>& series_names,
                          const std::vector<std::vector<double>>& values, const std::string& title,
                          const std::string& y_label) {
  double y1 = 0.0;
  for (const auto& g : values)
    for (double v : g) y1 = std::max(y1, v);
  if (y1 <= 0.0) y1 = 1.0;
  y1 *= 1.05;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  std::string out = header(title) + axes(0, 1, 0.0, y1, "", y_label, false);
  const double group_w = categories.empty() ? pw : pw / static_cast<double>(categories.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, series_names.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series_names.size() && s < values[c].size(); ++s) {
      const double h = values[c][s] / y1 * ph;
      out += "<rect x=\"" + num(gx + bar_w * static_cast<double>(s)) + "\" y=\"" + num(kTop + ph - h) +
             "\" width=\"" + num(bar_w) + "\" height=\"" + num(h) + "\" fill=\"" + kColors[s % 7] + "\"/>\n";
    }
    out += "<text x=\"" + num(gx + group_w * 0.4) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
           escape(categories[c]) + "</text>\n";
  }
  return out + legend(series_names) + "</svg>\n";
}

}  // namespace mmu
