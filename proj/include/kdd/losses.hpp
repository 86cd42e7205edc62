#pragma once

#include <functional>
#include <optional>

#include "kdd/kde.hpp"
#include "kdd/matrix.hpp"
#include "kdd/rng.hpp"

namespace kdd {

// Weights of the combined objective: gamma * KDD + alpha * Hinge +
// lambda_jac * Jacobian penalty, plus the kernel temperature tau and the
// finite-difference step delta of the regularizer.
struct LossWeights {
    double gamma = 1.0;
    double alpha = 0.0;
    double lambda_jac = 0.0;
    double tau = 1.0;
    double delta = 1e-3;

    // alpha is a 0/1 switch; gamma and lambda_jac are free nonnegative
    // weights (1e-5 is the blessed lambda preset). At least one of the two
    // main losses must be active.
    void validate() const;
};

// Value plus gradients with respect to the feature batches that produced it.
// Gradient rows align with the corresponding feature-matrix rows (anchor rows
// included when anchor sets are larger than the query batch).
struct LossResult {
    double value = 0.0;
    Matrix grad_real_features;
    Matrix grad_gen_features;
    Vector log_ratio_real;  // per real query, diagnostics
    Vector log_ratio_gen;   // per generated query
};

// --- hinge baseline ---

struct HingeDLoss {
    double value = 0.0;
    Vector grad_real;  // d value / d score
    Vector grad_fake;
};

// mean over fakes of max{0, 1 + s} + mean over reals of max{0, 1 - s}.
// Subgradient at the kink is 0.
HingeDLoss hinge_d_loss(std::span<const double> scores_real, std::span<const double> scores_fake);

struct HingeGLoss {
    double value = 0.0;
    Vector grad_fake;  // constant -1/n per entry
};

HingeGLoss hinge_g_loss(std::span<const double> scores_fake);

// --- KDD losses ---

// Discriminator loss over explicit anchor sets. The first n_real_queries /
// n_gen_queries base rows of each set double as the evaluation points; with
// leave_one_out, query i drops its own anchor row from its own set (cross-set
// evaluation never excludes). cond_real / cond_gen are optional per-query
// additive log-ratio offsets (class-conditional term); their gradients are
// reported so the caller can chain into the label embedding.
struct KddDLossResult {
    double value = 0.0;
    Matrix grad_real;  // per real anchor row
    Matrix grad_gen;
    Vector grad_cond_real;  // d value / d offset, hinge-gated
    Vector grad_cond_gen;
    Vector log_ratio_real;
    Vector log_ratio_gen;
};

KddDLossResult kdd_d_loss_anchored(const KernelSpec& spec, const AnchorSet& real_anchors,
                                   const AnchorSet& gen_anchors, bool leave_one_out,
                                   std::size_t n_real_queries, std::size_t n_gen_queries,
                                   const Vector* cond_real = nullptr,
                                   const Vector* cond_gen = nullptr);

// Plain form: anchors are the feature batches themselves and every row is a
// query.
LossResult kdd_d_loss(const Matrix& real_features, const Matrix& gen_features,
                      const KernelSpec& spec, bool leave_one_out);

// Generator loss: mean over generated queries of -(log p_hat_r - log p_hat_g).
// gen_features rows must be the leading base rows of gen_anchors (each query
// is also an anchor of its own KDE); the returned gradient covers every
// gen anchor row, combining query and anchor roles. Real anchors are
// constants: grad_real_features is all zeros by design.
LossResult kdd_g_loss(const Matrix& gen_features, const AnchorSet& real_anchors,
                      const AnchorSet& gen_anchors, const KernelSpec& spec, bool leave_one_out);

// --- class conditioning (projection form) ---

// value = y^T V f for a one-hot y: the selected embedding row dotted with the
// features. Gradients are the standard bilinear ones.
struct ConditionalResult {
    double value = 0.0;
    Vector grad_features;
    Matrix grad_embedding;
};

ConditionalResult conditional_logratio(const Vector& label_onehot, const Matrix& embedding,
                                       const Vector& features);

// --- Jacobian regularizer ---

// value = mean over rows x of | |phi_un(x + delta dx) - phi_un(x)| / delta - 1 |
// with one fresh unit direction dx per row. The result carries everything a
// caller needs to finish the parameter gradient: run the feature trunk's
// backward pass at `batch` with upstream_base and at perturbed_inputs with
// upstream_perturbed, then add the two parameter gradients.
struct JacobianRegResult {
    double value = 0.0;
    Matrix directions;
    Matrix perturbed_inputs;
    Matrix upstream_base;       // d value / d phi_un(x)
    Matrix upstream_perturbed;  // d value / d phi_un(x + delta dx)
};

using BatchFn = std::function<Matrix(const Matrix&)>;

JacobianRegResult jacobian_reg(const BatchFn& phi_un, const Matrix& batch, double delta, Rng& rng);

// Deterministic core with caller-supplied directions; the finite-difference
// oracle uses this to evaluate the same penalty twice.
JacobianRegResult jacobian_reg_with_directions(const BatchFn& phi_un, const Matrix& batch,
                                               double delta, const Matrix& directions);

// --- joint objective ---

struct JointParts {
    std::optional<LossResult> kdd;
    std::optional<LossResult> hinge;  // hinge expressed as feature-space gradients
    std::optional<double> jac;
};

// gamma * kdd + alpha * hinge + lambda_jac * jac, gradients combined
// linearly. Parts with zero weight are ignored entirely; a nonzero weight
// whose part is missing is an error.
LossResult joint_loss(const JointParts& parts, const LossWeights& weights);

}  // namespace kdd
