#include "kdd/data.hpp"

#include <cmath>
#include <stdexcept>

namespace kdd {

std::size_t DataSpec::dim() const {
    switch (kind) {
        case Kind::gaussian_ring: return 2;
        case Kind::gaussian_modes: return centers.cols();
        case Kind::uniform_square: return square_center.size();
    }
    throw std::logic_error("DataSpec: bad kind");
}

std::size_t DataSpec::num_classes() const {
    switch (kind) {
        case Kind::gaussian_ring: return num_modes;
        case Kind::gaussian_modes: return centers.rows();
        case Kind::uniform_square: return 1;
    }
    throw std::logic_error("DataSpec: bad kind");
}

Matrix DataSpec::mode_centers() const {
    if (kind == Kind::gaussian_modes) return centers;
    if (kind == Kind::uniform_square) {
        Matrix m(1, square_center.size());
        m.set_row(0, square_center);
        return m;
    }
    Matrix m(num_modes, 2);
    for (std::size_t k = 0; k < num_modes; ++k) {
        const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(k) /
                             static_cast<double>(num_modes);
        m(k, 0) = radius * std::cos(angle);
        m(k, 1) = radius * std::sin(angle);
    }
    return m;
}

void DataSpec::validate() const {
    switch (kind) {
        case Kind::gaussian_ring:
            if (num_modes == 0) throw std::invalid_argument("DataSpec: num_modes must be >= 1");
            if (!(radius > 0.0)) throw std::invalid_argument("DataSpec: radius must be > 0");
            if (!(sigma > 0.0)) throw std::invalid_argument("DataSpec: sigma must be > 0");
            return;
        case Kind::gaussian_modes:
            if (centers.rows() == 0) throw std::invalid_argument("DataSpec: needs mode centers");
            if (!(sigma > 0.0)) throw std::invalid_argument("DataSpec: sigma must be > 0");
            return;
        case Kind::uniform_square:
            if (square_center.empty()) throw std::invalid_argument("DataSpec: empty square center");
            if (!(half_width > 0.0)) throw std::invalid_argument("DataSpec: half_width must be > 0");
            return;
    }
    throw std::logic_error("DataSpec: bad kind");
}

LabeledBatch sample_data(const DataSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();

    LabeledBatch out;
    out.points = Matrix(n, spec.dim());
    out.labels.assign(n, 0);

    if (spec.kind == DataSpec::Kind::uniform_square) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < spec.dim(); ++j)
                out.points(i, j) = rng.uniform(spec.square_center[j] - spec.half_width,
                                               spec.square_center[j] + spec.half_width);
        return out;
    }

    const Matrix centers = spec.mode_centers();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(rng.next_below(centers.rows()));
        out.labels[i] = k;
        for (std::size_t j = 0; j < spec.dim(); ++j)
            out.points(i, j) = centers(k, j) + spec.sigma * rng.normal();
    }
    return out;
}

}  // namespace kdd
