#pragma once

#include "kdd/matrix.hpp"
#include "kdd/rng.hpp"

namespace kdd {

// Toy target distributions for the 2D experiments. The label of a mixture
// sample is its mode index.
struct DataSpec {
    enum class Kind { gaussian_ring, gaussian_modes, uniform_square };

    Kind kind = Kind::gaussian_ring;

    // gaussian_ring: num_modes centers equally spaced on a circle.
    std::size_t num_modes = 8;
    double radius = 2.0;
    double sigma = 0.1;

    // gaussian_modes: explicit centers (num_modes x dim), shared sigma.
    Matrix centers;

    // uniform_square
    Vector square_center = {0.0, 0.0};
    double half_width = 1.0;

    std::size_t dim() const;
    std::size_t num_classes() const;
    Matrix mode_centers() const;

    void validate() const;
};

struct LabeledBatch {
    Matrix points;
    std::vector<std::size_t> labels;  // mode indices; zeros for uniform_square
};

// Draw order per sample: mode index first (one u64), then the coordinates.
LabeledBatch sample_data(const DataSpec& spec, std::size_t n, Rng& rng);

}  // namespace kdd
