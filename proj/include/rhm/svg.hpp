#pragma once

#include <string>
#include <utility>
#include <vector>

// Just enough SVG to plot accuracy curves without dragging in a renderer.

namespace rhm {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

// Well-formed standalone SVG document; x may be log-scaled (all x > 0 then).
std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<PlotSeries>& series, bool log_x);

}  // namespace rhm
