#include "rhm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rhm {
namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

std::string num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<PlotSeries>& series, bool log_x) {
    const double width = 840, height = 560;
    const double left = 70, right = 30, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool any = false;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (log_x && x <= 0)
                throw std::invalid_argument("log axis needs positive x");
            const double xv = log_x ? std::log10(x) : x;
            if (!any) {
                x_min = x_max = xv;
                y_min = 0.0;
                y_max = std::max(1.0, y);
                any = true;
            } else {
                x_min = std::min(x_min, xv);
                x_max = std::max(x_max, xv);
                y_max = std::max(y_max, y);
            }
        }
    }
    if (x_max - x_min < 1e-12) x_max = x_min + 1.0;

    auto sx = [&](double x) {
        const double xv = log_x ? std::log10(x) : x;
        return left + (xv - x_min) / (x_max - x_min) * plot_w;
    };
    auto sy = [&](double y) {
        return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n"
        << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"17\">"
        << escape(title) << "</text>\n";

    // Frame.
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

    // Y ticks every quarter.
    for (int i = 0; i <= 4; ++i) {
        const double y = y_min + (y_max - y_min) * i / 4.0;
        const double py = sy(y);
        svg << "<line x1=\"" << left << "\" y1=\"" << py << "\" x2=\""
            << left + plot_w << "\" y2=\"" << py
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n"
            << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"12\">"
            << num(y) << "</text>\n";
    }

    // X ticks: decades when log, five even steps otherwise.
    if (log_x) {
        for (int e = static_cast<int>(std::floor(x_min));
             e <= static_cast<int>(std::ceil(x_max)); ++e) {
            if (e < x_min - 1e-9 || e > x_max + 1e-9) continue;
            const double px = left + (e - x_min) / (x_max - x_min) * plot_w;
            svg << "<line x1=\"" << px << "\" y1=\"" << top << "\" x2=\"" << px
                << "\" y2=\"" << top + plot_h
                << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n"
                << "<text x=\"" << px << "\" y=\"" << top + plot_h + 18
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                   "font-size=\"12\">1e"
                << e << "</text>\n";
        }
    } else {
        for (int i = 0; i <= 5; ++i) {
            const double x = x_min + (x_max - x_min) * i / 5.0;
            const double px = left + (x - x_min) / (x_max - x_min) * plot_w;
            svg << "<text x=\"" << px << "\" y=\"" << top + plot_h + 18
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                   "font-size=\"12\">"
                << num(x) << "</text>\n";
        }
    }

    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">"
        << escape(x_label) << "</text>\n"
        << "<text x=\"20\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\" transform=\"rotate(-90 20 "
        << top + plot_h / 2 << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(*kPalette))];
        std::ostringstream pts;
        for (const auto& [x, y] : series[i].points)
            pts << num(sx(x)) << "," << num(sy(y)) << " ";
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
        for (const auto& [x, y] : series[i].points)
            svg << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        // Legend.
        const double ly = top + 16 + 18 * static_cast<double>(i);
        svg << "<line x1=\"" << left + 12 << "\" y1=\"" << ly << "\" x2=\""
            << left + 36 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << left + 42 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape(series[i].label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace rhm
