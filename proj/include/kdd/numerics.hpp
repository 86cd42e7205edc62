#pragma once

#include <functional>
#include <stdexcept>

#include "kdd/matrix.hpp"
#include "kdd/rng.hpp"

namespace kdd {

// Norm below which l2_normalize refuses to operate. Degenerate features are
// a caller bug and must surface, never silently become NaN.
inline constexpr double kNormEpsilon = 1e-12;

// Distinct error for near-zero-norm normalization so callers can tell it
// apart from ordinary argument errors.
struct degenerate_norm_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// n rows, one per sample, entry (i,j) = mean[j] + std[j] * N(0,1).
Matrix sample_gaussian(Rng& rng, std::size_t n, const Vector& mean, const Vector& std_dev);

// n rows uniform in the axis-aligned square [center - hw, center + hw]^dim.
Matrix sample_uniform_square(Rng& rng, std::size_t n, const Vector& center, double half_width);

// Uniform direction on S^{dim-1}: Gaussian draw, then normalize.
Vector sample_unit_direction(Rng& rng, std::size_t dim);

// log sum_i exp(v_i), shifted by the max so it never overflows for |v_i| <= 700.
double log_sum_exp(std::span<const double> values);

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h). The validation
// oracle for every analytic gradient in the library.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5);

// Result of l2_normalize: the unit vector plus the reverse-mode pullback.
// backward(g) applies the Jacobian (I - u u^T) / |v| to an upstream gradient.
struct L2Normalized {
    Vector unit;
    double input_norm = 0.0;

    Vector backward(std::span<const double> upstream) const {
        if (upstream.size() != unit.size())
            throw std::invalid_argument("L2Normalized::backward: dimension mismatch");
        const double radial = dot(upstream, unit);
        Vector g(unit.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = (upstream[i] - radial * unit[i]) / input_norm;
        return g;
    }
};

L2Normalized l2_normalize(std::span<const double> v);

}  // namespace kdd
