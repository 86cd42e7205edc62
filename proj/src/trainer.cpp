#include "kdd/trainer.hpp"

#include <chrono>
#include <cmath>

#include "kdd/metrics.hpp"
#include "kdd/numerics.hpp"

namespace kdd {

namespace {

// Stream ids for the per-purpose RNGs. Optional code paths (augmentation,
// Jacobian term, metrics) draw from their own streams, so switching them on
// or off never shifts the training draws.
enum StreamId : std::uint64_t {
    kDataStream = 0,
    kLatentStream = 1,
    kAugStream = 2,
    kJacStream = 3,
    kEvalStream = 4,
    kInitGStream = 5,
    kInitDStream = 6,
};

struct LatentDraw {
    Matrix z;
    std::vector<std::size_t> labels;
};

// Draw order: all latent coordinates first, then (when conditional) one
// label per sample.
LatentDraw draw_latents(const TrainConfig& cfg, std::size_t n, Rng& rng) {
    LatentDraw out;
    out.z = Matrix(n, cfg.latent_dim);
    for (double& v : out.z.data()) v = rng.normal();
    if (cfg.conditional) {
        out.labels.resize(n);
        const std::size_t classes = cfg.data.num_classes();
        for (std::size_t i = 0; i < n; ++i)
            out.labels[i] = static_cast<std::size_t>(rng.next_below(classes));
    }
    return out;
}

Vector onehot(std::size_t c, std::size_t classes) {
    Vector y(classes, 0.0);
    y[c] = 1.0;
    return y;
}

// Hinge scores of the first n_base feature rows: <theta, phi> plus the
// projection term when enabled.
Vector base_scores(const FeatureMap& fm, const Matrix& phi, const std::vector<std::size_t>& labels,
                   bool projection, std::size_t n_base) {
    Vector s(n_base);
    for (std::size_t i = 0; i < n_base; ++i) {
        s[i] = dot(*fm.score_head, phi.row(i));
        if (projection) s[i] += dot(fm.label_embedding->row(labels[i]), phi.row(i));
    }
    return s;
}

// Chain hinge score gradients into feature upstreams and head gradients.
// Shared by the joint trainer and the hinge baseline so the alpha = 1
// reduction is bit-exact by construction.
void add_hinge_grads(const FeatureMap& fm, const Matrix& phi, std::span<const double> score_grads,
                     double alpha, const std::vector<std::size_t>& labels, bool projection,
                     Matrix& upstream, FeatureMapGrads& dg) {
    for (std::size_t i = 0; i < score_grads.size(); ++i) {
        const double g = alpha * score_grads[i];
        if (g == 0.0) continue;
        axpy(g, *fm.score_head, upstream.row(i));
        axpy(g, phi.row(i), dg.score_head);
        if (projection) {
            axpy(g, fm.label_embedding->row(labels[i]), upstream.row(i));
            axpy(g, phi.row(i), dg.label_embedding.row(labels[i]));
        }
    }
}

double fm_grads_squared_norm(const FeatureMapGrads& g) {
    double s = g.trunk.squared_norm();
    for (double v : g.score_head) s += v * v;
    for (double v : g.label_embedding.data()) s += v * v;
    return s;
}

double mode_radius(const DataSpec& data) {
    // 3 sigma captures essentially the whole mode of a Gaussian mixture.
    if (data.kind == DataSpec::Kind::uniform_square) return data.half_width;
    return 3.0 * data.sigma;
}

constexpr double kModeMinFrac = 0.2;

void fill_metrics(TrainState& s, const TrainConfig& cfg, TrainRecord& rec) {
    const LabeledBatch real = sample_data(cfg.data, cfg.metrics_samples, s.eval_rng);
    const LatentDraw lat = draw_latents(cfg, cfg.metrics_samples, s.eval_rng);
    const Matrix fake = generator_forward(s.gen, lat.z,
                                          cfg.conditional ? &lat.labels : nullptr);
    const auto dc = density_coverage(real.points, fake, cfg.metrics_knn);
    rec.density = dc.density;
    rec.coverage = dc.coverage;
    rec.frechet = frechet_gaussian(real.points, fake);
    rec.mode_coverage = mode_coverage(fake, cfg.data.mode_centers(), mode_radius(cfg.data),
                                      kModeMinFrac);
}

bool losses_finite(const StepLosses& l) {
    return std::isfinite(l.total) && std::isfinite(l.kdd) && std::isfinite(l.hinge) &&
           std::isfinite(l.jac) && std::isfinite(l.grad_norm);
}

}  // namespace

void TrainConfig::validate() const {
    data.validate();
    weights.validate();
    g_opt.validate();
    d_opt.validate();
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (leave_one_out && weights.gamma != 0.0 && batch_size < 2)
        throw std::invalid_argument("TrainConfig: leave_one_out needs batch_size >= 2");
    if (d_steps_per_g == 0) throw std::invalid_argument("TrainConfig: d_steps_per_g must be >= 1");
    if (stale_real_features && weights.gamma == 0.0)
        throw std::invalid_argument("TrainConfig: stale_real_features requires an active KDD loss");
    if (projection && !conditional)
        throw std::invalid_argument("TrainConfig: projection requires conditional");
    if (metrics_samples <= metrics_knn)
        throw std::invalid_argument("TrainConfig: metrics_samples must exceed metrics_knn");
    if (latent_dim == 0 || feature_dim == 0)
        throw std::invalid_argument("TrainConfig: zero dimension");
    if (!(augmentation_sigma >= 0.0))
        throw std::invalid_argument("TrainConfig: augmentation_sigma must be >= 0");
    if (kernel.is_vmf() && kernel.tau() != weights.tau)
        throw std::invalid_argument("TrainConfig: kernel tau must equal weights.tau");
    if (kernel.is_vmf() && !normalize_features)
        throw std::invalid_argument("TrainConfig: vMF kernel requires normalized features");
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    const Rng root(cfg.seed);

    Rng init_g = root.derive(kInitGStream);
    Rng init_d = root.derive(kInitDStream);

    Generator gen;
    gen.latent_dim = cfg.latent_dim;
    gen.num_classes = cfg.conditional ? cfg.data.num_classes() : 0;
    std::vector<std::size_t> g_widths;
    g_widths.push_back(cfg.latent_dim + gen.num_classes);
    for (std::size_t w : cfg.g_hidden) g_widths.push_back(w);
    g_widths.push_back(cfg.data.dim());
    gen.net = Mlp::init(std::move(g_widths), Activation::tanh, init_g);

    FeatureMap fm;
    fm.normalize_output = cfg.normalize_features;
    std::vector<std::size_t> d_widths;
    d_widths.push_back(cfg.data.dim());
    for (std::size_t w : cfg.d_hidden) d_widths.push_back(w);
    d_widths.push_back(cfg.feature_dim);
    fm.trunk = Mlp::init(std::move(d_widths), Activation::leaky_relu, init_d);
    if (cfg.weights.alpha != 0.0) {
        Vector theta(cfg.feature_dim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
        for (double& v : theta) v = scale * init_d.normal();
        fm.score_head = std::move(theta);
    }
    if (cfg.projection) {
        Matrix v(cfg.data.num_classes(), cfg.feature_dim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
        for (double& x : v.data()) x = scale * init_d.normal();
        fm.label_embedding = std::move(v);
    }

    return TrainState{
        std::move(gen),
        std::move(fm),
        Optimizer(cfg.g_opt),
        Optimizer(cfg.d_opt),
        std::nullopt,
        root.derive(kDataStream),
        root.derive(kLatentStream),
        root.derive(kAugStream),
        root.derive(kJacStream),
        root.derive(kEvalStream),
        0,
    };
}

AnchorSet assemble_anchors(const Matrix& base_batch, std::size_t n_copies, double sigma, Rng& rng,
                           AnchorSet::Origin origin) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("assemble_anchors: sigma must be >= 0");

    const std::size_t n = base_batch.rows();
    const std::size_t d = base_batch.cols();
    AnchorSet out;
    out.origin = origin;
    out.features = Matrix(n * (1 + n_copies), d);
    out.augmented_from.assign(n * (1 + n_copies), -1);

    for (std::size_t i = 0; i < n; ++i) out.features.set_row(i, base_batch.row(i));
    for (std::size_t c = 0; c < n_copies; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = n * (1 + c) + i;
            out.augmented_from[r] = static_cast<std::ptrdiff_t>(i);
            for (std::size_t j = 0; j < d; ++j)
                out.features(r, j) = base_batch(i, j) + sigma * rng.normal();
        }
    }
    return out;
}

StepLosses discriminator_step(TrainState& s, const TrainConfig& cfg) {
    const LossWeights& w = cfg.weights;
    const std::size_t nb = cfg.batch_size;
    const bool use_kdd = w.gamma != 0.0;
    const bool use_hinge = w.alpha != 0.0;
    const bool use_jac = w.lambda_jac != 0.0;

    const LabeledBatch real = sample_data(cfg.data, nb, s.data_rng);
    const LatentDraw lat = draw_latents(cfg, nb, s.latent_rng);
    const Matrix x_g = generator_forward(s.gen, lat.z, cfg.conditional ? &lat.labels : nullptr);

    const std::size_t n_aug = use_kdd ? cfg.augmentation_factor : 0;
    const AnchorSet real_data =
        n_aug ? assemble_anchors(real.points, n_aug, cfg.augmentation_sigma, s.aug_rng,
                                 AnchorSet::Origin::real)
              : AnchorSet::from_matrix(real.points, AnchorSet::Origin::real);
    const AnchorSet gen_data =
        n_aug ? assemble_anchors(x_g, n_aug, cfg.augmentation_sigma, s.aug_rng,
                                 AnchorSet::Origin::generated)
              : AnchorSet::from_matrix(x_g, AnchorSet::Origin::generated);

    const FeatureMapResult fr = feature_map_apply(s.fm, real_data.features);
    const FeatureMapResult fg = feature_map_apply(s.fm, gen_data.features);

    Matrix up_r(fr.phi.rows(), fr.phi.cols());
    Matrix up_g(fg.phi.rows(), fg.phi.cols());
    FeatureMapGrads dg = FeatureMapGrads::zeros_like(s.fm);
    StepLosses losses;

    std::optional<Vector> cond_r, cond_g;
    if (cfg.projection) {
        cond_r.emplace(nb);
        cond_g.emplace(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            (*cond_r)[i] = dot(s.fm.label_embedding->row(real.labels[i]), fr.phi.row(i));
            (*cond_g)[i] = dot(s.fm.label_embedding->row(lat.labels[i]), fg.phi.row(i));
        }
    }

    if (use_kdd) {
        AnchorSet real_anchors{fr.phi, AnchorSet::Origin::real, real_data.augmented_from};
        AnchorSet gen_anchors{fg.phi, AnchorSet::Origin::generated, gen_data.augmented_from};
        real_anchors.validate(cfg.kernel);
        gen_anchors.validate(cfg.kernel);

        const KddDLossResult res = kdd_d_loss_anchored(
            cfg.kernel, real_anchors, gen_anchors, cfg.leave_one_out, nb, nb,
            cond_r ? &*cond_r : nullptr, cond_g ? &*cond_g : nullptr);
        losses.kdd = res.value;
        for (std::size_t i = 0; i < up_r.rows(); ++i)
            axpy(w.gamma, res.grad_real.row(i), up_r.row(i));
        for (std::size_t i = 0; i < up_g.rows(); ++i)
            axpy(w.gamma, res.grad_gen.row(i), up_g.row(i));
        if (cfg.projection) {
            for (std::size_t i = 0; i < nb; ++i) {
                const double cr = w.gamma * res.grad_cond_real[i];
                if (cr != 0.0) {
                    axpy(cr, s.fm.label_embedding->row(real.labels[i]), up_r.row(i));
                    axpy(cr, fr.phi.row(i), dg.label_embedding.row(real.labels[i]));
                }
                const double cg = w.gamma * res.grad_cond_gen[i];
                if (cg != 0.0) {
                    axpy(cg, s.fm.label_embedding->row(lat.labels[i]), up_g.row(i));
                    axpy(cg, fg.phi.row(i), dg.label_embedding.row(lat.labels[i]));
                }
            }
        }
    }

    if (use_hinge) {
        const Vector sr = base_scores(s.fm, fr.phi, real.labels, cfg.projection, nb);
        const Vector sg = base_scores(s.fm, fg.phi, lat.labels, cfg.projection, nb);
        const HingeDLoss h = hinge_d_loss(sr, sg);
        losses.hinge = h.value;
        add_hinge_grads(s.fm, fr.phi, h.grad_real, w.alpha, real.labels, cfg.projection, up_r, dg);
        add_hinge_grads(s.fm, fg.phi, h.grad_fake, w.alpha, lat.labels, cfg.projection, up_g, dg);
    }

    if (use_jac) {
        // Penalty batch: the non-augmented real and generated samples.
        Matrix jac_batch(2 * nb, cfg.data.dim());
        for (std::size_t i = 0; i < nb; ++i) {
            jac_batch.set_row(i, real.points.row(i));
            jac_batch.set_row(nb + i, x_g.row(i));
        }
        const Mlp& trunk = s.fm.trunk;
        const JacobianRegResult jac = jacobian_reg(
            [&trunk](const Matrix& m) { return mlp_forward(trunk, m); }, jac_batch, w.delta,
            s.jac_rng);
        losses.jac = jac.value;

        MlpTape tape_base, tape_pert;
        mlp_forward(trunk, jac_batch, &tape_base);
        mlp_forward(trunk, jac.perturbed_inputs, &tape_pert);
        const MlpBackward gb = mlp_backward(trunk, tape_base, jac.upstream_base);
        const MlpBackward gp = mlp_backward(trunk, tape_pert, jac.upstream_perturbed);
        dg.trunk.add_scaled(gb.grads, w.lambda_jac);
        dg.trunk.add_scaled(gp.grads, w.lambda_jac);
    }

    const MlpBackward br = feature_map_backward(s.fm, fr.tape, up_r);
    const MlpBackward bg = feature_map_backward(s.fm, fg.tape, up_g);
    dg.trunk.add_scaled(br.grads, 1.0);
    dg.trunk.add_scaled(bg.grads, 1.0);

    losses.total = 0.0;
    if (use_kdd) losses.total += w.gamma * losses.kdd;
    if (use_hinge) losses.total += w.alpha * losses.hinge;
    if (use_jac) losses.total += w.lambda_jac * losses.jac;
    losses.grad_norm = std::sqrt(fm_grads_squared_norm(dg));

    optimizer_step(s.d_opt, s.fm, dg);

    if (cfg.stale_real_features)
        s.stale_real = AnchorSet{fr.phi, AnchorSet::Origin::real, real_data.augmented_from};

    return losses;
}

StepLosses generator_step(TrainState& s, const TrainConfig& cfg) {
    const LossWeights& w = cfg.weights;
    const std::size_t nb = cfg.batch_size;
    const bool use_kdd = w.gamma != 0.0;
    const bool use_hinge = w.alpha != 0.0;

    const LatentDraw lat = draw_latents(cfg, nb, s.latent_rng);
    MlpTape g_tape;
    const Matrix x_g =
        generator_forward(s.gen, lat.z, cfg.conditional ? &lat.labels : nullptr, &g_tape);

    const std::size_t n_aug = use_kdd ? cfg.augmentation_factor : 0;
    const AnchorSet gen_data =
        n_aug ? assemble_anchors(x_g, n_aug, cfg.augmentation_sigma, s.aug_rng,
                                 AnchorSet::Origin::generated)
              : AnchorSet::from_matrix(x_g, AnchorSet::Origin::generated);
    const FeatureMapResult fg = feature_map_apply(s.fm, gen_data.features);

    Matrix up_g(fg.phi.rows(), fg.phi.cols());
    StepLosses losses;

    if (use_kdd) {
        AnchorSet real_anchors;
        if (cfg.stale_real_features) {
            if (!s.stale_real)
                throw std::runtime_error("generator_step: stale feature cache is empty");
            real_anchors = *s.stale_real;
        } else {
            const LabeledBatch real = sample_data(cfg.data, nb, s.data_rng);
            const AnchorSet real_data =
                n_aug ? assemble_anchors(real.points, n_aug, cfg.augmentation_sigma, s.aug_rng,
                                         AnchorSet::Origin::real)
                      : AnchorSet::from_matrix(real.points, AnchorSet::Origin::real);
            // Real anchors are constants for the generator: no tape kept.
            real_anchors = AnchorSet{feature_map_apply(s.fm, real_data.features).phi,
                                     AnchorSet::Origin::real, real_data.augmented_from};
        }
        AnchorSet gen_anchors{fg.phi, AnchorSet::Origin::generated, gen_data.augmented_from};
        real_anchors.validate(cfg.kernel);
        gen_anchors.validate(cfg.kernel);

        Matrix queries(nb, fg.phi.cols());
        for (std::size_t j = 0; j < nb; ++j) queries.set_row(j, fg.phi.row(j));
        const LossResult res =
            kdd_g_loss(queries, real_anchors, gen_anchors, cfg.kernel, cfg.leave_one_out);
        losses.kdd = res.value;
        for (std::size_t i = 0; i < up_g.rows(); ++i)
            axpy(w.gamma, res.grad_gen_features.row(i), up_g.row(i));

        if (cfg.projection) {
            // Conditional extension of the log-ratio: L_G gains -mean(y^T V phi).
            const double inv_n = 1.0 / static_cast<double>(nb);
            for (std::size_t j = 0; j < nb; ++j) {
                const ConditionalResult c =
                    conditional_logratio(onehot(lat.labels[j], s.fm.label_embedding->rows()),
                                         *s.fm.label_embedding, fg.phi.row_copy(j));
                losses.kdd -= c.value * inv_n;
                axpy(-w.gamma * inv_n, c.grad_features, up_g.row(j));
            }
        }
    }

    if (use_hinge) {
        const Vector sg = base_scores(s.fm, fg.phi, lat.labels, cfg.projection, nb);
        const HingeGLoss h = hinge_g_loss(sg);
        losses.hinge = h.value;
        FeatureMapGrads unused = FeatureMapGrads::zeros_like(s.fm);
        add_hinge_grads(s.fm, fg.phi, h.grad_fake, w.alpha, lat.labels, cfg.projection, up_g,
                        unused);
    }

    // Feature-map parameters are frozen here; only the input gradient flows on.
    const MlpBackward bwd = feature_map_backward(s.fm, fg.tape, up_g);

    // Fold augmented-row gradients back onto their base samples (the jitter is
    // additive, so d(aug)/d(base) = I).
    Matrix grad_x(nb, cfg.data.dim());
    for (std::size_t r = 0; r < bwd.grad_input.rows(); ++r) {
        const std::ptrdiff_t base = gen_data.augmented_from[r];
        const std::size_t target = base < 0 ? r : static_cast<std::size_t>(base);
        axpy(1.0, bwd.grad_input.row(r), grad_x.row(target));
    }

    const MlpBackward gb = mlp_backward(s.gen.net, g_tape, grad_x);

    losses.total = 0.0;
    if (use_kdd) losses.total += w.gamma * losses.kdd;
    if (use_hinge) losses.total += w.alpha * losses.hinge;
    losses.grad_norm = std::sqrt(gb.grads.squared_norm());

    optimizer_step(s.g_opt, s.gen.net, gb.grads);
    return losses;
}

namespace {

TrainHistory run_loop(const TrainConfig& cfg, TrainState& s,
                      StepLosses (*d_step)(TrainState&, const TrainConfig&),
                      StepLosses (*g_step)(TrainState&, const TrainConfig&)) {
    TrainHistory h;
    h.g_checksums.push_back(param_checksum(s.gen.net));
    h.d_checksums.push_back(param_checksum(s.fm));

    for (std::size_t iter = 1; iter <= cfg.n_iters; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        StepLosses dl{}, gl{};
        try {
            for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) dl = d_step(s, cfg);
            gl = g_step(s, cfg);
        } catch (const std::exception& e) {
            // Divergence surfaces as non-finite forward values; record and stop
            // rather than limping on with poisoned parameters.
            h.aborted = true;
            h.abort_reason =
                "aborted at iteration " + std::to_string(iter) + ": " + e.what();
            return h;
        }
        s.iter = iter;
        h.g_checksums.push_back(param_checksum(s.gen.net));
        h.d_checksums.push_back(param_checksum(s.fm));

        if (!losses_finite(dl) || !losses_finite(gl)) {
            h.aborted = true;
            h.abort_reason = "non-finite loss at iteration " + std::to_string(iter);
            return h;
        }

        const bool log_now =
            (cfg.metrics_every > 0 && iter % cfg.metrics_every == 0) || iter == cfg.n_iters;
        if (log_now) {
            TrainRecord rec;
            rec.iter = iter;
            rec.d_loss = dl.total;
            rec.d_kdd = dl.kdd;
            rec.d_hinge = dl.hinge;
            rec.d_jac = dl.jac;
            rec.g_loss = gl.total;
            rec.g_kdd = gl.kdd;
            rec.g_hinge = gl.hinge;
            rec.d_grad_norm = dl.grad_norm;
            rec.g_grad_norm = gl.grad_norm;
            fill_metrics(s, cfg, rec);
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            h.records.push_back(rec);
        }
    }
    return h;
}

// --- standalone hinge trainer: no KDE, no augmentation, no Jacobian term ---

StepLosses hinge_d_step(TrainState& s, const TrainConfig& cfg) {
    const std::size_t nb = cfg.batch_size;
    const LabeledBatch real = sample_data(cfg.data, nb, s.data_rng);
    const LatentDraw lat = draw_latents(cfg, nb, s.latent_rng);
    const Matrix x_g = generator_forward(s.gen, lat.z, cfg.conditional ? &lat.labels : nullptr);

    const FeatureMapResult fr = feature_map_apply(s.fm, real.points);
    const FeatureMapResult fg = feature_map_apply(s.fm, x_g);

    const Vector sr = base_scores(s.fm, fr.phi, real.labels, cfg.projection, nb);
    const Vector sg = base_scores(s.fm, fg.phi, lat.labels, cfg.projection, nb);
    const HingeDLoss h = hinge_d_loss(sr, sg);

    Matrix up_r(fr.phi.rows(), fr.phi.cols());
    Matrix up_g(fg.phi.rows(), fg.phi.cols());
    FeatureMapGrads dg = FeatureMapGrads::zeros_like(s.fm);
    add_hinge_grads(s.fm, fr.phi, h.grad_real, 1.0, real.labels, cfg.projection, up_r, dg);
    add_hinge_grads(s.fm, fg.phi, h.grad_fake, 1.0, lat.labels, cfg.projection, up_g, dg);

    const MlpBackward br = feature_map_backward(s.fm, fr.tape, up_r);
    const MlpBackward bg = feature_map_backward(s.fm, fg.tape, up_g);
    dg.trunk.add_scaled(br.grads, 1.0);
    dg.trunk.add_scaled(bg.grads, 1.0);

    StepLosses losses;
    losses.hinge = h.value;
    losses.total = h.value;
    losses.grad_norm = std::sqrt(fm_grads_squared_norm(dg));
    optimizer_step(s.d_opt, s.fm, dg);
    return losses;
}

StepLosses hinge_g_step(TrainState& s, const TrainConfig& cfg) {
    const std::size_t nb = cfg.batch_size;
    const LatentDraw lat = draw_latents(cfg, nb, s.latent_rng);
    MlpTape g_tape;
    const Matrix x_g =
        generator_forward(s.gen, lat.z, cfg.conditional ? &lat.labels : nullptr, &g_tape);
    const FeatureMapResult fg = feature_map_apply(s.fm, x_g);

    const Vector sg = base_scores(s.fm, fg.phi, lat.labels, cfg.projection, nb);
    const HingeGLoss h = hinge_g_loss(sg);

    Matrix up_g(fg.phi.rows(), fg.phi.cols());
    FeatureMapGrads unused = FeatureMapGrads::zeros_like(s.fm);
    add_hinge_grads(s.fm, fg.phi, h.grad_fake, 1.0, lat.labels, cfg.projection, up_g, unused);

    const MlpBackward bwd = feature_map_backward(s.fm, fg.tape, up_g);
    const MlpBackward gb = mlp_backward(s.gen.net, g_tape, bwd.grad_input);

    StepLosses losses;
    losses.hinge = h.value;
    losses.total = h.value;
    losses.grad_norm = std::sqrt(gb.grads.squared_norm());
    optimizer_step(s.g_opt, s.gen.net, gb.grads);
    return losses;
}

}  // namespace

TrainHistory train(const TrainConfig& cfg, std::optional<TrainState>* out_state) {
    cfg.validate();
    TrainState s = init_train_state(cfg);
    TrainHistory h = run_loop(cfg, s, &discriminator_step, &generator_step);
    if (out_state) out_state->emplace(std::move(s));
    return h;
}

TrainHistory train_hinge_baseline(const TrainConfig& cfg, std::optional<TrainState>* out_state) {
    cfg.validate();
    if (cfg.weights.alpha == 0.0)
        throw std::invalid_argument("train_hinge_baseline: alpha must be 1");
    TrainState s = init_train_state(cfg);
    TrainHistory h = run_loop(cfg, s, &hinge_d_step, &hinge_g_step);
    if (out_state) out_state->emplace(std::move(s));
    return h;
}

Matrix sample_generated(TrainState& state, const TrainConfig& cfg, std::size_t n, Rng& rng) {
    const LatentDraw lat = draw_latents(cfg, n, rng);
    return generator_forward(state.gen, lat.z, cfg.conditional ? &lat.labels : nullptr);
}

}  // namespace kdd
