#include "kdd/losses.hpp"

#include <cmath>

#include "kdd/numerics.hpp"

namespace kdd {

void LossWeights::validate() const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("LossWeights: gamma must be >= 0");
    if (alpha != 0.0 && alpha != 1.0) throw std::invalid_argument("LossWeights: alpha must be 0 or 1");
    if (!(lambda_jac >= 0.0)) throw std::invalid_argument("LossWeights: lambda_jac must be >= 0");
    if (!(tau > 0.0)) throw std::invalid_argument("LossWeights: tau must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("LossWeights: delta must be > 0");
    if (!(gamma + alpha > 0.0))
        throw std::invalid_argument("LossWeights: at least one of gamma, alpha must be active");
}

HingeDLoss hinge_d_loss(std::span<const double> scores_real, std::span<const double> scores_fake) {
    if (scores_real.empty() || scores_fake.empty())
        throw std::invalid_argument("hinge_d_loss: empty batch");

    HingeDLoss out;
    out.grad_real.assign(scores_real.size(), 0.0);
    out.grad_fake.assign(scores_fake.size(), 0.0);

    const double inv_f = 1.0 / static_cast<double>(scores_fake.size());
    for (std::size_t i = 0; i < scores_fake.size(); ++i) {
        const double m = 1.0 + scores_fake[i];
        if (m > 0.0) {
            out.value += m * inv_f;
            out.grad_fake[i] = inv_f;
        }
    }
    const double inv_r = 1.0 / static_cast<double>(scores_real.size());
    for (std::size_t i = 0; i < scores_real.size(); ++i) {
        const double m = 1.0 - scores_real[i];
        if (m > 0.0) {
            out.value += m * inv_r;
            out.grad_real[i] = -inv_r;
        }
    }
    return out;
}

HingeGLoss hinge_g_loss(std::span<const double> scores_fake) {
    if (scores_fake.empty()) throw std::invalid_argument("hinge_g_loss: empty batch");

    HingeGLoss out;
    const double inv_n = 1.0 / static_cast<double>(scores_fake.size());
    out.grad_fake.assign(scores_fake.size(), -inv_n);
    for (double s : scores_fake) out.value -= s * inv_n;
    return out;
}

namespace {

void add_scaled_rows(Matrix& acc, const Matrix& m, double scale) {
    if (!acc.same_shape(m)) throw std::invalid_argument("loss gradients: shape mismatch");
    for (std::size_t i = 0; i < m.rows(); ++i)
        axpy(scale, m.row(i), acc.row(i));
}

void check_kdd_inputs(const KernelSpec&, const AnchorSet& real_anchors,
                      const AnchorSet& gen_anchors, bool leave_one_out,
                      std::size_t n_real_queries, std::size_t n_gen_queries) {
    if (real_anchors.size() == 0 || gen_anchors.size() == 0)
        throw std::invalid_argument("kdd loss: empty anchor set");
    if (real_anchors.features.cols() != gen_anchors.features.cols())
        throw std::invalid_argument("kdd loss: feature dimension mismatch");
    if (n_real_queries > real_anchors.size() || n_gen_queries > gen_anchors.size())
        throw std::invalid_argument("kdd loss: more queries than anchors");
    // Loss evaluation points are base samples only, never augmented copies.
    for (std::size_t i = 0; i < n_real_queries; ++i)
        if (real_anchors.augmented_from[i] >= 0)
            throw std::invalid_argument("kdd loss: augmented anchor used as evaluation point");
    for (std::size_t j = 0; j < n_gen_queries; ++j)
        if (gen_anchors.augmented_from[j] >= 0)
            throw std::invalid_argument("kdd loss: augmented anchor used as evaluation point");
    if (leave_one_out) {
        if (n_real_queries > 0 && real_anchors.size() < 2)
            throw std::invalid_argument("kdd loss: leave-one-out needs >= 2 real anchors");
        if (n_gen_queries > 0 && gen_anchors.size() < 2)
            throw std::invalid_argument("kdd loss: leave-one-out needs >= 2 generated anchors");
    }
}

}  // namespace

KddDLossResult kdd_d_loss_anchored(const KernelSpec& spec, const AnchorSet& real_anchors,
                                   const AnchorSet& gen_anchors, bool leave_one_out,
                                   std::size_t n_real_queries, std::size_t n_gen_queries,
                                   const Vector* cond_real, const Vector* cond_gen) {
    check_kdd_inputs(spec, real_anchors, gen_anchors, leave_one_out, n_real_queries, n_gen_queries);
    if (n_real_queries == 0 || n_gen_queries == 0)
        throw std::invalid_argument("kdd_d_loss: empty query batch");
    if (cond_real && cond_real->size() != n_real_queries)
        throw std::invalid_argument("kdd_d_loss: cond_real size mismatch");
    if (cond_gen && cond_gen->size() != n_gen_queries)
        throw std::invalid_argument("kdd_d_loss: cond_gen size mismatch");

    const std::size_t dim = real_anchors.features.cols();
    KddDLossResult out;
    out.grad_real = Matrix(real_anchors.size(), dim);
    out.grad_gen = Matrix(gen_anchors.size(), dim);
    out.grad_cond_real.assign(n_real_queries, 0.0);
    out.grad_cond_gen.assign(n_gen_queries, 0.0);
    out.log_ratio_real.resize(n_real_queries);
    out.log_ratio_gen.resize(n_gen_queries);

    // Generated-sample term: mean_j max{0, 1 + log ratio(phi(x_g_j))}.
    const double inv_g = 1.0 / static_cast<double>(n_gen_queries);
    for (std::size_t j = 0; j < n_gen_queries; ++j) {
        const auto q = gen_anchors.features.row(j);
        const std::optional<std::size_t> excl =
            leave_one_out ? std::optional<std::size_t>(j) : std::nullopt;
        double ratio = log_kde(spec, real_anchors, q) - log_kde(spec, gen_anchors, q, excl);
        if (cond_gen) ratio += (*cond_gen)[j];
        out.log_ratio_gen[j] = ratio;

        if (1.0 + ratio > 0.0) {
            out.value += (1.0 + ratio) * inv_g;
            const auto gr = log_kde_backward(spec, real_anchors, q);
            const auto gg = log_kde_backward(spec, gen_anchors, q, excl);
            auto row = out.grad_gen.row(j);
            for (std::size_t k = 0; k < dim; ++k)
                row[k] += inv_g * (gr.grad_query[k] - gg.grad_query[k]);
            add_scaled_rows(out.grad_real, gr.grad_anchors, inv_g);
            add_scaled_rows(out.grad_gen, gg.grad_anchors, -inv_g);
            out.grad_cond_gen[j] = inv_g;
        }
    }

    // Real-sample term: mean_i max{0, 1 - log ratio(phi(x_r_i))}.
    const double inv_r = 1.0 / static_cast<double>(n_real_queries);
    for (std::size_t i = 0; i < n_real_queries; ++i) {
        const auto q = real_anchors.features.row(i);
        const std::optional<std::size_t> excl =
            leave_one_out ? std::optional<std::size_t>(i) : std::nullopt;
        double ratio = log_kde(spec, real_anchors, q, excl) - log_kde(spec, gen_anchors, q);
        if (cond_real) ratio += (*cond_real)[i];
        out.log_ratio_real[i] = ratio;

        if (1.0 - ratio > 0.0) {
            out.value += (1.0 - ratio) * inv_r;
            const auto gr = log_kde_backward(spec, real_anchors, q, excl);
            const auto gg = log_kde_backward(spec, gen_anchors, q);
            auto row = out.grad_real.row(i);
            for (std::size_t k = 0; k < dim; ++k)
                row[k] -= inv_r * (gr.grad_query[k] - gg.grad_query[k]);
            add_scaled_rows(out.grad_real, gr.grad_anchors, -inv_r);
            add_scaled_rows(out.grad_gen, gg.grad_anchors, inv_r);
            out.grad_cond_real[i] = -inv_r;
        }
    }
    return out;
}

LossResult kdd_d_loss(const Matrix& real_features, const Matrix& gen_features,
                      const KernelSpec& spec, bool leave_one_out) {
    const auto real_anchors = AnchorSet::from_matrix(real_features, AnchorSet::Origin::real);
    const auto gen_anchors = AnchorSet::from_matrix(gen_features, AnchorSet::Origin::generated);
    auto anchored = kdd_d_loss_anchored(spec, real_anchors, gen_anchors, leave_one_out,
                                        real_features.rows(), gen_features.rows());
    LossResult out;
    out.value = anchored.value;
    out.grad_real_features = std::move(anchored.grad_real);
    out.grad_gen_features = std::move(anchored.grad_gen);
    out.log_ratio_real = std::move(anchored.log_ratio_real);
    out.log_ratio_gen = std::move(anchored.log_ratio_gen);
    return out;
}

LossResult kdd_g_loss(const Matrix& gen_features, const AnchorSet& real_anchors,
                      const AnchorSet& gen_anchors, const KernelSpec& spec, bool leave_one_out) {
    const std::size_t n_q = gen_features.rows();
    check_kdd_inputs(spec, real_anchors, gen_anchors, leave_one_out, 0, n_q);
    if (n_q == 0) throw std::invalid_argument("kdd_g_loss: empty query batch");
    if (gen_features.cols() != gen_anchors.features.cols())
        throw std::invalid_argument("kdd_g_loss: feature dimension mismatch");
    // Each query must be the matching base anchor row: its own anchor role is
    // part of the returned gradient, so the correspondence has to be real.
    for (std::size_t j = 0; j < n_q; ++j) {
        const auto q = gen_features.row(j);
        const auto a = gen_anchors.features.row(j);
        for (std::size_t k = 0; k < q.size(); ++k)
            if (q[k] != a[k])
                throw std::invalid_argument(
                    "kdd_g_loss: gen_features rows must be the leading rows of gen_anchors");
    }

    const std::size_t dim = gen_features.cols();
    LossResult out;
    out.grad_real_features = Matrix(real_anchors.size(), dim);  // constants: stays zero
    out.grad_gen_features = Matrix(gen_anchors.size(), dim);
    out.log_ratio_gen.resize(n_q);

    const double inv_n = 1.0 / static_cast<double>(n_q);
    for (std::size_t j = 0; j < n_q; ++j) {
        const auto q = gen_features.row(j);
        const std::optional<std::size_t> excl =
            leave_one_out ? std::optional<std::size_t>(j) : std::nullopt;
        const double ratio = log_kde(spec, real_anchors, q) - log_kde(spec, gen_anchors, q, excl);
        out.log_ratio_gen[j] = ratio;
        out.value -= ratio * inv_n;

        const auto gg = log_kde_backward(spec, gen_anchors, q, excl);
        const auto gr = log_kde_backward(spec, real_anchors, q);
        auto row = out.grad_gen_features.row(j);
        for (std::size_t k = 0; k < dim; ++k)
            row[k] += inv_n * (gg.grad_query[k] - gr.grad_query[k]);
        add_scaled_rows(out.grad_gen_features, gg.grad_anchors, inv_n);
    }
    return out;
}

ConditionalResult conditional_logratio(const Vector& label_onehot, const Matrix& embedding,
                                       const Vector& features) {
    if (label_onehot.size() != embedding.rows())
        throw std::invalid_argument("conditional_logratio: label/embedding mismatch");
    if (features.size() != embedding.cols())
        throw std::invalid_argument("conditional_logratio: feature/embedding mismatch");

    std::optional<std::size_t> hot_index;
    for (std::size_t c = 0; c < label_onehot.size(); ++c) {
        const double y = label_onehot[c];
        if (y == 1.0 && !hot_index) {
            hot_index = c;
        } else if (y != 0.0) {
            throw std::invalid_argument("conditional_logratio: label is not one-hot");
        }
    }
    if (!hot_index) throw std::invalid_argument("conditional_logratio: label is not one-hot");
    const std::size_t hot = *hot_index;

    ConditionalResult out;
    out.value = dot(embedding.row(hot), features);
    out.grad_features = Vector(embedding.row(hot).begin(), embedding.row(hot).end());
    out.grad_embedding = Matrix(embedding.rows(), embedding.cols());
    out.grad_embedding.set_row(hot, features);
    return out;
}

JacobianRegResult jacobian_reg_with_directions(const BatchFn& phi_un, const Matrix& batch,
                                               double delta, const Matrix& directions) {
    if (!(delta > 0.0)) throw std::invalid_argument("jacobian_reg: delta must be > 0");
    if (batch.rows() == 0) throw std::invalid_argument("jacobian_reg: empty batch");
    if (!directions.same_shape(batch))
        throw std::invalid_argument("jacobian_reg: directions shape mismatch");

    JacobianRegResult out;
    out.directions = directions;
    out.perturbed_inputs = batch;
    for (std::size_t i = 0; i < batch.rows(); ++i)
        axpy(delta, directions.row(i), out.perturbed_inputs.row(i));

    const Matrix base = phi_un(batch);
    const Matrix pert = phi_un(out.perturbed_inputs);
    if (base.rows() != batch.rows() || !base.same_shape(pert))
        throw std::invalid_argument("jacobian_reg: phi_un output shape mismatch");

    const std::size_t n = batch.rows();
    const std::size_t k = base.cols();
    out.upstream_base = Matrix(n, k);
    out.upstream_perturbed = Matrix(n, k);

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::sqrt(squared_distance(pert.row(i), base.row(i)));
        const double g = r / delta - 1.0;
        out.value += std::abs(g) * inv_n;

        // Subgradient 0 at the |.| kink and at the norm's r = 0 cusp.
        if (g == 0.0 || r <= kNormEpsilon) continue;
        const double coeff = (g > 0.0 ? 1.0 : -1.0) * inv_n / (delta * r);
        for (std::size_t j = 0; j < k; ++j) {
            const double diff = pert(i, j) - base(i, j);
            out.upstream_perturbed(i, j) = coeff * diff;
            out.upstream_base(i, j) = -coeff * diff;
        }
    }
    return out;
}

JacobianRegResult jacobian_reg(const BatchFn& phi_un, const Matrix& batch, double delta, Rng& rng) {
    if (batch.rows() == 0) throw std::invalid_argument("jacobian_reg: empty batch");
    Matrix directions(batch.rows(), batch.cols());
    for (std::size_t i = 0; i < batch.rows(); ++i)
        directions.set_row(i, sample_unit_direction(rng, batch.cols()));
    return jacobian_reg_with_directions(phi_un, batch, delta, directions);
}

namespace {

void accumulate_part(LossResult& acc, const LossResult& part, double weight, bool& shapes_set) {
    if (!shapes_set) {
        acc.grad_real_features = Matrix(part.grad_real_features.rows(), part.grad_real_features.cols());
        acc.grad_gen_features = Matrix(part.grad_gen_features.rows(), part.grad_gen_features.cols());
        shapes_set = true;
    }
    acc.value += weight * part.value;
    add_scaled_rows(acc.grad_real_features, part.grad_real_features, weight);
    add_scaled_rows(acc.grad_gen_features, part.grad_gen_features, weight);
}

}  // namespace

LossResult joint_loss(const JointParts& parts, const LossWeights& weights) {
    weights.validate();

    LossResult out;
    bool shapes_set = false;
    if (weights.gamma != 0.0) {
        if (!parts.kdd) throw std::invalid_argument("joint_loss: gamma > 0 but kdd part missing");
        accumulate_part(out, *parts.kdd, weights.gamma, shapes_set);
        out.log_ratio_real = parts.kdd->log_ratio_real;
        out.log_ratio_gen = parts.kdd->log_ratio_gen;
    }
    if (weights.alpha != 0.0) {
        if (!parts.hinge) throw std::invalid_argument("joint_loss: alpha > 0 but hinge part missing");
        accumulate_part(out, *parts.hinge, weights.alpha, shapes_set);
    }
    if (weights.lambda_jac != 0.0) {
        if (!parts.jac) throw std::invalid_argument("joint_loss: lambda_jac > 0 but jac part missing");
        out.value += weights.lambda_jac * *parts.jac;
    }
    return out;
}

}  // namespace kdd
