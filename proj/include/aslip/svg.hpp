#pragma once

// Minimal SVG line plots for batch figures.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace aslip {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x, y;  // NaN y values break the line
};

struct PlotSpec {
    std::string title, x_label, y_label;
    double width = 640, height = 420;
    double y_min = std::numeric_limits<double>::quiet_NaN();  // NaN: fit to data
    double y_max = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}
}  // namespace detail

inline void write_line_plot(std::ostream& os, const PlotSpec& spec, const std::vector<Series>& series) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            if (std::isfinite(s.y[i])) {
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
        }
    }
    if (!std::isnan(spec.y_min)) y0 = spec.y_min;
    if (!std::isnan(spec.y_max)) y1 = spec.y_max;
    if (!std::isfinite(x0)) x0 = 0, x1 = 1;
    if (!std::isfinite(y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;

    const double ml = 60, mr = 130, mt = 36, mb = 48;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    using detail::num;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(spec.width) << "\" height=\""
       << num(spec.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(spec.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::escape_xml(spec.title) << "</text>\n";
    os << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int k = 0; k <= 5; ++k) {
        const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
        os << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(px(xv)) << "\" y2=\""
           << num(mt + ph + 5) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(mt + ph + 18) << "\" text-anchor=\"middle\">"
           << num(xv) << "</text>\n";
        os << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(ml) << "\" y2=\""
           << num(py(yv)) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
           << "</text>\n";
    }
    os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(spec.height - 10) << "\" text-anchor=\"middle\">"
       << detail::escape_xml(spec.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << num(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::escape_xml(spec.y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::string path;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) {
                pen_down = false;
                continue;
            }
            path += (pen_down ? " L" : " M") + num(px(s.x[i])) + ' ' + num(py(s.y[i]));
            pen_down = true;
        }
        os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        const double ly = mt + 14 + 18 * static_cast<double>(si);
        os << "<line x1=\"" << num(ml + pw + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(ml + pw + 30)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>";
        os << "<text x=\"" << num(ml + pw + 35) << "\" y=\"" << num(ly + 4) << "\">" << detail::escape_xml(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace aslip
