#pragma once

// Minimal static SVG charts.

#include <string>
#include <utility>
#include <vector>

namespace mmu {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), drawn in order
};

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label);

// groups[i] has one value per entry of series_names.
std::string svg_bar_chart(const std::vector<std::string>& categories, const std::vector<std::string>& series_names,
                          const std::vector<std::vector<double>>& values, const std::string& title,
                          const std::string& y_label);

}  // namespace mmu
