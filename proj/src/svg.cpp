#include "kdd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kdd::svg {

namespace {

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Bounds {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

Bounds data_bounds(const std::vector<Series>& series, const std::vector<Line>& lines) {
    Bounds b;
    bool any = false;
    auto grow = [&](double x, double y) {
        if (!any) {
            b.xmin = b.xmax = x;
            b.ymin = b.ymax = y;
            any = true;
        } else {
            b.xmin = std::min(b.xmin, x);
            b.xmax = std::max(b.xmax, x);
            b.ymin = std::min(b.ymin, y);
            b.ymax = std::max(b.ymax, y);
        }
    };
    for (const Series& s : series)
        for (const auto& [x, y] : s.points) grow(x, y);
    for (const Line& l : lines)
        for (const auto& [x, y] : l.points) grow(x, y);
    if (!any) return Bounds{};

    // Pad 5% per side; degenerate spans get a unit box around the value.
    const double dx = b.xmax - b.xmin;
    const double dy = b.ymax - b.ymin;
    const double padx = dx > 0.0 ? 0.05 * dx : 0.5;
    const double pady = dy > 0.0 ? 0.05 * dy : 0.5;
    b.xmin -= padx;
    b.xmax += padx;
    b.ymin -= pady;
    b.ymax += pady;
    return b;
}

}  // namespace

std::string render_scatter(const std::vector<Series>& series, const std::vector<Line>& lines,
                           const PlotSpec& spec) {
    const Bounds b = data_bounds(series, lines);
    const double inner_w = spec.width - 2.0 * spec.margin;
    const double inner_h = spec.height - 2.0 * spec.margin;
    auto sx = [&](double x) { return spec.margin + (x - b.xmin) / (b.xmax - b.xmin) * inner_w; };
    auto sy = [&](double y) {
        return spec.height - spec.margin - (y - b.ymin) / (b.ymax - b.ymin) * inner_h;
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
       << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
    os << "<rect width=\"" << spec.width << "\" height=\"" << spec.height
       << "\" fill=\"white\"/>\n";

    if (!spec.title.empty())
        os << "<text x=\"" << spec.width / 2 << "\" y=\"30\" text-anchor=\"middle\" "
           << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title << "</text>\n";

    // axes box + ticks
    os << "<rect x=\"" << spec.margin << "\" y=\"" << spec.margin << "\" width=\"" << px(inner_w)
       << "\" height=\"" << px(inner_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    const int n_ticks = 5;
    for (int t = 0; t <= n_ticks; ++t) {
        const double fx = b.xmin + (b.xmax - b.xmin) * t / n_ticks;
        const double fy = b.ymin + (b.ymax - b.ymin) * t / n_ticks;
        const double tx = sx(fx);
        const double ty = sy(fy);
        os << "<line x1=\"" << px(tx) << "\" y1=\"" << px(spec.height - spec.margin)
           << "\" x2=\"" << px(tx) << "\" y2=\"" << px(spec.height - spec.margin + 5)
           << "\" stroke=\"#333333\"/>\n";
        os << "<text x=\"" << px(tx) << "\" y=\"" << px(spec.height - spec.margin + 20)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(fx)
           << "</text>\n";
        os << "<line x1=\"" << px(spec.margin - 5) << "\" y1=\"" << px(ty) << "\" x2=\""
           << px(spec.margin) << "\" y2=\"" << px(ty) << "\" stroke=\"#333333\"/>\n";
        os << "<text x=\"" << px(spec.margin - 8) << "\" y=\"" << px(ty + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(fy)
           << "</text>\n";
    }

    for (const Line& l : lines) {
        if (l.points.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < l.points.size(); ++i)
            os << (i ? " " : "") << px(sx(l.points[i].first)) << ","
               << px(sy(l.points[i].second));
        os << "\"/>\n";
    }

    for (const Series& s : series) {
        os << "<g fill=\"" << s.color << "\" fill-opacity=\"0.65\">\n";
        for (const auto& [x, y] : s.points)
            os << "<circle cx=\"" << px(sx(x)) << "\" cy=\"" << px(sy(y)) << "\" r=\""
               << px(spec.point_radius) << "\"/>\n";
        os << "</g>\n";
    }

    // legend
    int ly = spec.margin + 16;
    for (const Series& s : series) {
        if (s.label.empty()) continue;
        os << "<circle cx=\"" << spec.width - spec.margin - 110 << "\" cy=\"" << ly - 4
           << "\" r=\"5\" fill=\"" << s.color << "\"/>\n";
        os << "<text x=\"" << spec.width - spec.margin - 98 << "\" y=\"" << ly
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
        ly += 18;
    }

    os << "</svg>\n";
    return os.str();
}

void save(const std::string& path, const std::string& svg_text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("svg: cannot open " + path + " for writing");
    f << svg_text;
    if (!f) throw std::runtime_error("svg: write failed for " + path);
}

}  // namespace kdd::svg
