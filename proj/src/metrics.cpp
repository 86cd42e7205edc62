#include "kdd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kdd {

namespace {

constexpr double kCovEpsilon = 1e-10;

// Squared k-th nearest neighbor distance of each real sample within the real
// set. Kept squared end to end: ball membership compares squared distances,
// so ties resolve identically to any oracle doing the same.
std::vector<double> knn_radii_squared(const Matrix& real, std::size_t k) {
    const std::size_t n = real.rows();
    std::vector<double> radii(n);
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dists.push_back(squared_distance(real.row(i), real.row(j)));
        }
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        radii[i] = dists[k - 1];
    }
    return radii;
}

}  // namespace

DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, std::size_t k) {
    if (k == 0) throw std::invalid_argument("density_coverage: k must be >= 1");
    if (real.rows() <= k || fake.rows() <= k)
        throw std::invalid_argument("density_coverage: need more than k samples per set");
    if (real.cols() != fake.cols())
        throw std::invalid_argument("density_coverage: dimension mismatch");

    const std::vector<double> radii2 = knn_radii_squared(real, k);

    double density_hits = 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < real.rows(); ++i) {
        const double r2 = radii2[i];
        bool any = false;
        for (std::size_t j = 0; j < fake.rows(); ++j) {
            if (squared_distance(real.row(i), fake.row(j)) <= r2) {
                density_hits += 1.0;
                any = true;
            }
        }
        if (any) ++covered;
    }

    DensityCoverage out;
    out.density = density_hits / (static_cast<double>(k) * static_cast<double>(fake.rows()));
    out.coverage = static_cast<double>(covered) / static_cast<double>(real.rows());
    return out;
}

namespace {

struct MomentFit {
    Vector mean;
    Matrix cov;  // unbiased, diagonal-regularized
};

MomentFit fit_moments(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    MomentFit fit;
    fit.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) fit.mean[j] += x(i, j);
    for (double& m : fit.mean) m /= static_cast<double>(n);

    fit.cov = Matrix(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                fit.cov(a, b) += (x(i, a) - fit.mean[a]) * (x(i, b) - fit.mean[b]);
    for (double& v : fit.cov.data()) v /= static_cast<double>(n - 1);
    for (std::size_t a = 0; a < d; ++a) fit.cov(a, a) += kCovEpsilon;
    return fit;
}

// tr((A B)^{1/2}) for SPD A, B of dimension 1 or 2. For 2x2, M = A B has
// nonnegative trace and determinant det(A) det(B), and
// tr(sqrt(M)) = sqrt(tr(M) + 2 sqrt(det(M))).
double trace_sqrt_product(const Matrix& a, const Matrix& b) {
    const std::size_t d = a.rows();
    if (d == 1) return std::sqrt(a(0, 0) * b(0, 0));

    const double tr_m = a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0) +
                        a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1);
    const double det_a = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double det_b = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
    const double det_m = std::max(det_a, 0.0) * std::max(det_b, 0.0);
    return std::sqrt(std::max(tr_m + 2.0 * std::sqrt(det_m), 0.0));
}

}  // namespace

double frechet_gaussian(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    const std::size_t d = a.cols();
    if (d == 0 || d > 2)
        throw std::invalid_argument("frechet_gaussian: dimensions 1 and 2 only");
    if (a.rows() < d + 1 || b.rows() < d + 1)
        throw std::invalid_argument("frechet_gaussian: need at least dim+1 samples per set");

    const MomentFit fa = fit_moments(a);
    const MomentFit fb = fit_moments(b);

    double mean_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double delta = fa.mean[j] - fb.mean[j];
        mean_term += delta * delta;
    }

    double trace_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) trace_term += fa.cov(j, j) + fb.cov(j, j);
    trace_term -= 2.0 * trace_sqrt_product(fa.cov, fb.cov);

    // Tiny negative drift from the regularizer/rounding clamps to zero.
    return std::max(mean_term + trace_term, 0.0);
}

double mode_coverage(const Matrix& fake, const Matrix& mode_centers, double radius,
                     double min_frac) {
    if (!(radius > 0.0)) throw std::invalid_argument("mode_coverage: radius must be > 0");
    if (!(min_frac > 0.0 && min_frac < 1.0))
        throw std::invalid_argument("mode_coverage: min_frac must be in (0, 1)");
    if (mode_centers.rows() == 0) throw std::invalid_argument("mode_coverage: no mode centers");
    if (fake.cols() != mode_centers.cols())
        throw std::invalid_argument("mode_coverage: dimension mismatch");

    const std::size_t num_modes = mode_centers.rows();
    std::vector<std::size_t> counts(num_modes, 0);
    const double r2 = radius * radius;

    for (std::size_t i = 0; i < fake.rows(); ++i) {
        std::size_t best = 0;
        double best_d2 = squared_distance(fake.row(i), mode_centers.row(0));
        for (std::size_t m = 1; m < num_modes; ++m) {
            const double d2 = squared_distance(fake.row(i), mode_centers.row(m));
            if (d2 < best_d2) {
                best_d2 = d2;
                best = m;
            }
        }
        if (best_d2 <= r2) ++counts[best];
    }

    const double threshold =
        min_frac * static_cast<double>(fake.rows()) / static_cast<double>(num_modes);
    std::size_t covered = 0;
    for (std::size_t c : counts)
        if (static_cast<double>(c) >= threshold) ++covered;
    return static_cast<double>(covered) / static_cast<double>(num_modes);
}

}  // namespace kdd
