#pragma once

#include <string>
#include <vector>

namespace kdd::svg {

struct Series {
    std::string label;
    std::string color;  // e.g. "#1f77b4"
    std::vector<std::pair<double, double>> points;
};

struct Line {
    std::string color;
    std::vector<std::pair<double, double>> points;  // polyline vertices
};

struct PlotSpec {
    std::string title;
    int width = 800;
    int height = 600;
    int margin = 60;
    double point_radius = 2.5;
};

// Deterministic scatter plot: identical inputs yield byte-identical SVG.
// With no data, renders axes over the unit box.
std::string render_scatter(const std::vector<Series>& series, const std::vector<Line>& lines,
                           const PlotSpec& spec);

void save(const std::string& path, const std::string& svg_text);

}  // namespace kdd::svg
