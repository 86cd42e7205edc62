#include "kdd/kde.hpp"

#include <cmath>

#include "kdd/numerics.hpp"

namespace kdd {

namespace {

void require_unit(std::span<const double> v, double tol, const char* what) {
    const double n = norm2(v);
    if (std::abs(n - 1.0) > tol)
        throw std::invalid_argument(std::string(what) + ": vMF kernel requires unit-norm input");
}

void require_dims(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Log-kernel values of every non-excluded anchor against the query, in row
// order. Excluded rows are skipped, not zeroed, so the summation order is
// bit-identical to evaluating the explicitly reduced anchor set.
std::vector<double> anchor_log_kernels(const KernelSpec& spec, const AnchorSet& anchors,
                                       std::span<const double> query,
                                       std::optional<std::size_t> exclude) {
    const std::size_t n = anchors.size();
    if (n == 0) throw std::invalid_argument("log_kde: empty anchor set");
    if (exclude && *exclude >= n) throw std::invalid_argument("log_kde: exclude index out of range");

    std::vector<double> lk;
    lk.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (exclude && *exclude == i) continue;
        lk.push_back(log_kernel(spec, anchors.features.row(i), query));
    }
    if (lk.empty()) throw std::invalid_argument("log_kde: exclusion empties the anchor set");
    return lk;
}

}  // namespace

std::size_t AnchorSet::base_count() const {
    std::size_t n = 0;
    for (std::ptrdiff_t b : augmented_from)
        if (b < 0) ++n;
    return n;
}

void AnchorSet::validate(const KernelSpec& spec, double unit_tol) const {
    if (features.rows() == 0) throw std::invalid_argument("AnchorSet: needs at least one anchor");
    if (augmented_from.size() != features.rows())
        throw std::invalid_argument("AnchorSet: augmented_from size mismatch");
    if (!features.all_finite()) throw std::invalid_argument("AnchorSet: non-finite feature");
    if (spec.is_vmf()) {
        for (std::size_t i = 0; i < features.rows(); ++i) {
            if (std::abs(norm2(features.row(i)) - 1.0) > unit_tol)
                throw std::invalid_argument("AnchorSet: vMF anchors must be unit-norm");
        }
    }
}

double log_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
    require_dims(a, b, "log_kernel");
    if (spec.is_vmf()) {
        require_unit(a, kVmfEvalUnitTol, "log_kernel");
        require_unit(b, kVmfEvalUnitTol, "log_kernel");
        return dot(a, b) / spec.tau();
    }
    const double s = spec.sigma();
    return -squared_distance(a, b) / (2.0 * s * s);
}

double log_kde(const KernelSpec& spec, const AnchorSet& anchors, std::span<const double> query,
               std::optional<std::size_t> exclude) {
    const auto lk = anchor_log_kernels(spec, anchors, query, exclude);
    return log_sum_exp(lk) - std::log(static_cast<double>(lk.size()));
}

double log_density_ratio(const KernelSpec& spec, const AnchorSet& real_anchors,
                         const AnchorSet& gen_anchors, std::span<const double> query,
                         std::optional<std::size_t> exclude_real,
                         std::optional<std::size_t> exclude_gen) {
    return log_kde(spec, real_anchors, query, exclude_real) -
           log_kde(spec, gen_anchors, query, exclude_gen);
}

LogKdeGrads log_kde_backward(const KernelSpec& spec, const AnchorSet& anchors,
                             std::span<const double> query,
                             std::optional<std::size_t> exclude) {
    const std::size_t n = anchors.size();
    const std::size_t dim = query.size();
    const auto lk = anchor_log_kernels(spec, anchors, query, exclude);
    const double lse = log_sum_exp(lk);

    LogKdeGrads out;
    out.grad_query.assign(dim, 0.0);
    out.grad_anchors = Matrix(n, dim);
    out.weights.assign(n, 0.0);

    std::size_t k = 0;  // index into the compacted lk vector
    for (std::size_t i = 0; i < n; ++i) {
        if (exclude && *exclude == i) continue;
        const double w = std::exp(lk[k] - lse);
        out.weights[i] = w;
        ++k;

        const auto anchor = anchors.features.row(i);
        if (spec.is_vmf()) {
            const double inv_tau = 1.0 / spec.tau();
            for (std::size_t j = 0; j < dim; ++j) {
                out.grad_query[j] += w * anchor[j] * inv_tau;
                out.grad_anchors(i, j) = w * query[j] * inv_tau;
            }
        } else {
            const double inv_s2 = 1.0 / (spec.sigma() * spec.sigma());
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = anchor[j] - query[j];
                out.grad_query[j] += w * d * inv_s2;
                out.grad_anchors(i, j) = -w * d * inv_s2;
            }
        }
    }
    return out;
}

namespace {

// Index of the anchor with the highest log-kernel value; ties -> lowest index.
std::size_t nearest_anchor(const KernelSpec& spec, const AnchorSet& anchors,
                           std::span<const double> query, double& best_lk) {
    std::size_t best = 0;
    best_lk = log_kernel(spec, anchors.features.row(0), query);
    for (std::size_t i = 1; i < anchors.size(); ++i) {
        const double lk = log_kernel(spec, anchors.features.row(i), query);
        if (lk > best_lk) {
            best_lk = lk;
            best = i;
        }
    }
    return best;
}

// dK(anchor, q)/dq / p_hat(q), computed as exp(log k - log p_hat) * dlogK/dq
// so the unnormalized exponentials never overflow.
Vector nn_term(const KernelSpec& spec, const AnchorSet& anchors, std::span<const double> query) {
    double lk_nn = 0.0;
    const std::size_t nn = nearest_anchor(spec, anchors, query, lk_nn);
    const double scale = std::exp(lk_nn - log_kde(spec, anchors, query));

    const auto anchor = anchors.features.row(nn);
    Vector term(query.size());
    if (spec.is_vmf()) {
        for (std::size_t j = 0; j < term.size(); ++j)
            term[j] = scale * anchor[j] / spec.tau();
    } else {
        const double inv_s2 = 1.0 / (spec.sigma() * spec.sigma());
        for (std::size_t j = 0; j < term.size(); ++j)
            term[j] = scale * (anchor[j] - query[j]) * inv_s2;
    }
    return term;
}

}  // namespace

Vector nn_grad_approx(const KernelSpec& spec, const AnchorSet& real_anchors,
                      const AnchorSet& gen_anchors, std::span<const double> query) {
    if (real_anchors.size() == 0 || gen_anchors.size() == 0)
        throw std::invalid_argument("nn_grad_approx: empty anchor set");

    Vector gen_term = nn_term(spec, gen_anchors, query);
    const Vector real_term = nn_term(spec, real_anchors, query);
    for (std::size_t j = 0; j < gen_term.size(); ++j) gen_term[j] -= real_term[j];
    return gen_term;
}

}  // namespace kdd
