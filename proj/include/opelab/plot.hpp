#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "opelab/errors.hpp"
#include "opelab/format.hpp"
#include "opelab/harness.hpp"

namespace opelab {

struct PlotStyle {
    int width = 640;
    int height = 440;
    int margin_left = 70;
    int margin_right = 25;
    int margin_top = 45;
    int margin_bottom = 60;
};

namespace detail {

inline const char* method_color(const std::string& method) {
    if (method == "va_ope") return "#1f77b4";
    if (method == "fqi_ope") return "#ff7f0e";
    return "#2ca02c";
}

inline std::string svg_coord(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << v;
    return os.str();
}

} // namespace detail

/// Render one (H, p) panel: x = sqrt(K), y = log10(mean abs error), one
/// polyline per method with a shaded [q10, q90] band behind it. Standalone
/// SVG 1.1, no external references.
inline std::string render_error_plot(const std::vector<SummaryRow>& rows, int H, double p,
                                     const PlotStyle& style = {}) {
    std::map<std::string, std::vector<SummaryRow>> by_method;
    for (const auto& r : rows)
        if (r.H == H && r.p == p) by_method[r.method].push_back(r);
    if (by_method.empty()) throw Error("render_error_plot: no rows for the requested panel");
    for (auto& [m, series] : by_method)
        std::sort(series.begin(), series.end(),
                  [](const SummaryRow& a, const SummaryRow& b) { return a.K < b.K; });

    constexpr double kFloor = 1e-16; // keep log10 finite for a zero error
    auto ylog = [&](double v) { return std::log10(std::max(v, kFloor)); };

    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& [m, series] : by_method)
        for (const auto& r : series) {
            const double x = std::sqrt(static_cast<double>(r.K));
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min({y_lo, ylog(r.q10), ylog(r.mean_abs_error)});
            y_hi = std::max({y_hi, ylog(r.q90), ylog(r.mean_abs_error)});
        }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;
    const double y_pad = 0.05 * (y_hi - y_lo);
    y_lo -= y_pad;
    y_hi += y_pad;

    const double plot_w = style.width - style.margin_left - style.margin_right;
    const double plot_h = style.height - style.margin_top - style.margin_bottom;
    auto px = [&](double x) {
        return style.margin_left + (x - x_lo) / (x_hi - x_lo) * plot_w;
    };
    auto py = [&](double y) {
        return style.margin_top + (y_hi - y) / (y_hi - y_lo) * plot_h;
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << style.width << "\" height=\"" << style.height << "\" viewBox=\"0 0 "
        << style.width << " " << style.height << "\">\n"
        << "<rect width=\"" << style.width << "\" height=\"" << style.height
        << "\" fill=\"white\"/>\n";

    svg << "<text x=\"" << style.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">OPE error, H=" << H
        << ", p=" << fmt_double(p) << "</text>\n";

    // Axes.
    const double ax_bottom = style.margin_top + plot_h;
    svg << "<line x1=\"" << style.margin_left << "\" y1=\"" << ax_bottom << "\" x2=\""
        << style.margin_left + plot_w << "\" y2=\"" << ax_bottom
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << style.margin_left << "\" y1=\"" << style.margin_top
        << "\" x2=\"" << style.margin_left << "\" y2=\"" << ax_bottom
        << "\" stroke=\"black\"/>\n";

    // X ticks at the sqrt(K) grid of the first series.
    for (const auto& r : by_method.begin()->second) {
        const double x = px(std::sqrt(static_cast<double>(r.K)));
        svg << "<line x1=\"" << detail::svg_coord(x) << "\" y1=\"" << ax_bottom
            << "\" x2=\"" << detail::svg_coord(x) << "\" y2=\"" << ax_bottom + 5
            << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << detail::svg_coord(x) << "\" y=\"" << ax_bottom + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << detail::svg_coord(std::sqrt(static_cast<double>(r.K))) << "</text>\n";
    }
    // Y ticks at integer log10 levels.
    for (int level = static_cast<int>(std::ceil(y_lo)); level <= std::floor(y_hi); ++level) {
        const double y = py(level);
        svg << "<line x1=\"" << style.margin_left - 5 << "\" y1=\"" << detail::svg_coord(y)
            << "\" x2=\"" << style.margin_left << "\" y2=\"" << detail::svg_coord(y)
            << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << style.margin_left - 9 << "\" y=\"" << detail::svg_coord(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << level
            << "</text>\n";
    }
    svg << "<text x=\"" << style.margin_left + plot_w / 2 << "\" y=\"" << style.height - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << "sqrt(K)</text>\n"
        << "<text x=\"18\" y=\"" << style.margin_top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << style.margin_top + plot_h / 2 << ")\">"
        << "log10 OPE error</text>\n";

    // Bands first so lines draw on top.
    for (const auto& [method, series] : by_method) {
        std::ostringstream d;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double x = px(std::sqrt(static_cast<double>(series[i].K)));
            d << (i == 0 ? "M" : "L") << detail::svg_coord(x) << ' '
              << detail::svg_coord(py(ylog(series[i].q10))) << ' ';
        }
        for (std::size_t i = series.size(); i-- > 0;) {
            const double x = px(std::sqrt(static_cast<double>(series[i].K)));
            d << "L" << detail::svg_coord(x) << ' '
              << detail::svg_coord(py(ylog(series[i].q90))) << ' ';
        }
        d << "Z";
        svg << "<path class=\"band\" d=\"" << d.str() << "\" fill=\""
            << detail::method_color(method) << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }

    for (const auto& [method, series] : by_method) {
        std::ostringstream pts;
        for (const auto& r : series) {
            const double x = px(std::sqrt(static_cast<double>(r.K)));
            pts << detail::svg_coord(x) << ',' << detail::svg_coord(py(ylog(r.mean_abs_error)))
                << ' ';
        }
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
            << detail::method_color(method) << "\" stroke-width=\"2\"/>\n";
    }

    // Legend, top right.
    int slot = 0;
    for (const auto& [method, series] : by_method) {
        const double ly = style.margin_top + 14 + 18 * slot++;
        const double lx = style.margin_left + plot_w - 120;
        svg << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\""
            << ly << "\" stroke=\"" << detail::method_color(method)
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << method << "</text>\n";
    }

    svg << "</svg>\n";
    return svg.str();
}

/// Write one SVG per (H, p) pair found in the summary. Returns the paths.
inline std::vector<std::string> emit_plots(const std::vector<SummaryRow>& rows,
                                           const std::string& out_dir,
                                           const PlotStyle& style = {}) {
    if (rows.empty()) throw Error("emit_plots: empty summary");
    std::filesystem::create_directories(out_dir);
    std::map<std::pair<int, double>, bool> panels;
    for (const auto& r : rows) panels[{r.H, r.p}] = true;
    std::vector<std::string> paths;
    for (const auto& [key, _] : panels) {
        const auto [H, p] = key;
        const std::string path =
            out_dir + "/errors_H" + std::to_string(H) + "_p" + fmt_double(p) + ".svg";
        std::ofstream out(path);
        if (!out) throw Error("cannot open '" + path + "' for writing");
        out << render_error_plot(rows, H, p, style);
        paths.push_back(path);
    }
    return paths;
}

} // namespace opelab
