#pragma once

#include <optional>
#include <string>

#include "kdd/matrix.hpp"

namespace kdd {

// Kernel evaluated in unnormalized log form. The normalization constant is
// never computed: every consumer works with log-ratios or gradients where it
// cancels (the vMF normalizer would need Bessel functions for nothing).
//
//   vMF:      log K(a, b) = <a, b> / tau          (a, b on the unit sphere)
//   Gaussian: log K(a, b) = -|a - b|^2 / (2 sigma^2)
class KernelSpec {
public:
    enum class Kind { von_mises_fisher, gaussian };

    static KernelSpec vmf(double tau) {
        if (!(tau > 0.0)) throw std::invalid_argument("KernelSpec: tau must be > 0");
        return KernelSpec(Kind::von_mises_fisher, tau);
    }

    static KernelSpec gaussian(double sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("KernelSpec: sigma must be > 0");
        return KernelSpec(Kind::gaussian, sigma);
    }

    Kind kind() const { return kind_; }
    bool is_vmf() const { return kind_ == Kind::von_mises_fisher; }

    double tau() const { return param_; }
    double sigma() const { return param_; }

private:
    KernelSpec(Kind k, double p) : kind_(k), param_(p) {}

    Kind kind_;
    double param_;
};

// A batch of KDE anchor points in feature space, tagged by origin.
// augmented_from[i] is the base-row index an augmented anchor derives from,
// or -1 for the base rows themselves.
struct AnchorSet {
    enum class Origin { real, generated };

    Matrix features;
    Origin origin = Origin::real;
    std::vector<std::ptrdiff_t> augmented_from;

    static AnchorSet from_matrix(Matrix m, Origin origin) {
        AnchorSet s;
        s.augmented_from.assign(m.rows(), -1);
        s.features = std::move(m);
        s.origin = origin;
        return s;
    }

    std::size_t size() const { return features.rows(); }
    std::size_t base_count() const;

    // Enforces the type invariants for use with the given kernel. The strict
    // 1e-9 unit tolerance applies to anchor sets assembled on the production
    // path; kde evaluation itself checks at a looser tolerance (see below).
    void validate(const KernelSpec& spec, double unit_tol = 1e-9) const;
};

// Unit-norm tolerance applied inside kernel/KDE evaluation under vMF. Loose
// enough that central-difference probes (h = 1e-5) of the smooth extension
// pass; a feature map that forgot to normalize misses it by far more.
inline constexpr double kVmfEvalUnitTol = 1e-4;

double log_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

// log[(1/n') sum_{i != exclude} K(anchor_i, query)] via log_sum_exp.
double log_kde(const KernelSpec& spec, const AnchorSet& anchors, std::span<const double> query,
               std::optional<std::size_t> exclude = std::nullopt);

// log p_hat_real(query) - log p_hat_gen(query).
double log_density_ratio(const KernelSpec& spec, const AnchorSet& real_anchors,
                         const AnchorSet& gen_anchors, std::span<const double> query,
                         std::optional<std::size_t> exclude_real = std::nullopt,
                         std::optional<std::size_t> exclude_gen = std::nullopt);

// Reverse-mode gradients of log_kde. weights are the softmax weights
// w_i = exp(log k_i) / sum_j exp(log k_j); they sum to 1 and the excluded
// row is exactly zero.
struct LogKdeGrads {
    Vector grad_query;
    Matrix grad_anchors;
    Vector weights;
};

LogKdeGrads log_kde_backward(const KernelSpec& spec, const AnchorSet& anchors,
                             std::span<const double> query,
                             std::optional<std::size_t> exclude = std::nullopt);

// Nearest-anchor approximation of the per-sample generator gradient: only the
// highest-kernel anchor of each set contributes, densities stay exact.
// Returns  dK(g_nn, q)/dq / p_hat_gen(q)  -  dK(r_nn, q)/dq / p_hat_real(q),
// i.e. generated term minus real term. Ties break to the lowest index.
Vector nn_grad_approx(const KernelSpec& spec, const AnchorSet& real_anchors,
                      const AnchorSet& gen_anchors, std::span<const double> query);

}  // namespace kdd
