#include "kdd/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace kdd {

Matrix sample_gaussian(Rng& rng, std::size_t n, const Vector& mean, const Vector& std_dev) {
    if (mean.size() != std_dev.size())
        throw std::invalid_argument("sample_gaussian: mean/std dimension mismatch");
    for (double s : std_dev)
        if (!(s > 0.0)) throw std::invalid_argument("sample_gaussian: std entries must be > 0");

    Matrix out(n, mean.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < mean.size(); ++j)
            out(i, j) = mean[j] + std_dev[j] * rng.normal();
    return out;
}

Matrix sample_uniform_square(Rng& rng, std::size_t n, const Vector& center, double half_width) {
    if (!(half_width > 0.0))
        throw std::invalid_argument("sample_uniform_square: half_width must be > 0");

    Matrix out(n, center.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < center.size(); ++j)
            out(i, j) = rng.uniform(center[j] - half_width, center[j] + half_width);
    return out;
}

Vector sample_unit_direction(Rng& rng, std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("sample_unit_direction: dim must be >= 1");

    Vector v(dim);
    // A draw with |v| ~ 0 would lose the direction; redrawing keeps the
    // distribution uniform (rejection of a measure-zero-ish event).
    while (true) {
        for (double& x : v) x = rng.normal();
        const double n = norm2(v);
        if (n > kNormEpsilon) {
            for (double& x : v) x /= n;
            return v;
        }
    }
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");

    const double m = *std::max_element(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s);
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");

    Vector grad(x.size());
    Vector probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

L2Normalized l2_normalize(std::span<const double> v) {
    const double n = norm2(v);
    if (!(n > kNormEpsilon))
        throw degenerate_norm_error("l2_normalize: input norm below 1e-12");

    L2Normalized out;
    out.input_norm = n;
    out.unit.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.unit[i] = v[i] / n;
    return out;
}

}  // namespace kdd
