#pragma once

#include <algorithm>
#include <cmath>

#include "kdd/matrix.hpp"
#include "kdd/rng.hpp"

namespace kdd::test {

// max_i |a_i - f_i| / max(1, |f|_inf) — the relative-error metric used by
// every gradient comparison in this repo.
inline double rel_err(std::span<const double> analytic, std::span<const double> fd) {
    double scale = 1.0;
    for (double f : fd) scale = std::max(scale, std::abs(f));
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, std::abs(analytic[i] - fd[i]));
    return worst / scale;
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = scale * rng.normal();
    return m;
}

inline Vector random_unit_vector(Rng& rng, std::size_t n) {
    Vector v = random_vector(rng, n);
    const double s = norm2(v);
    for (double& x : v) x /= s;
    return v;
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) m.set_row(i, random_unit_vector(rng, cols));
    return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace kdd::test
