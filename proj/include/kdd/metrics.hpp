#pragma once

#include "kdd/matrix.hpp"

namespace kdd {

struct MetricReport {
    double density = 0.0;
    double coverage = 0.0;
    double frechet = 0.0;
    double mode_coverage = 0.0;
    std::size_t n_real = 0;
    std::size_t n_fake = 0;
};

struct DensityCoverage {
    double density = 0.0;
    double coverage = 0.0;
};

// k-NN ball fidelity/diversity pair. Ball radii are k-th nearest neighbor
// distances within the real set (self excluded); membership uses closed balls.
//   density  = (1 / (k |fake|)) sum_fake sum_real [fake in ball(real_i)]
//   coverage = fraction of real samples whose ball contains >= 1 fake sample
DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, std::size_t k);

// Squared Fréchet distance between Gaussian fits of the two clouds:
// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the matrix square root
// in closed form (dimensions 1 and 2 only; covariances use the unbiased
// estimator and get 1e-10 added to the diagonal before the root).
double frechet_gaussian(const Matrix& a, const Matrix& b);

// Fraction of modes receiving at least min_frac * |fake| / num_modes samples,
// where a sample counts for its nearest center (lowest index on ties) and
// only within the given radius.
double mode_coverage(const Matrix& fake, const Matrix& mode_centers, double radius,
                     double min_frac);

}  // namespace kdd
