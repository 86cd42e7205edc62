#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdd/trainer.hpp"
#include "test_support.hpp"

using namespace kdd;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.batch_size = 8;
    cfg.n_iters = 20;
    cfg.metrics_every = 10;
    cfg.metrics_samples = 64;
    cfg.g_hidden = {16};
    cfg.d_hidden = {16};
    cfg.feature_dim = 2;
    cfg.weights = LossWeights{1.0, 0.0, 0.0, 1.0, 1e-3};
    cfg.kernel = KernelSpec::vmf(1.0);
    cfg.augmentation_factor = 1;
    cfg.leave_one_out = true;
    return cfg;
}

}  // namespace

TEST_CASE("assemble_anchors: no copies means the base batch exactly") {
    Rng rng(1);
    const Matrix base = test::random_matrix(rng, 6, 2);
    const AnchorSet a = assemble_anchors(base, 0, 0.05, rng);
    CHECK(a.size() == 6);
    CHECK(a.base_count() == 6);
    for (std::size_t k = 0; k < base.size(); ++k)
        CHECK(a.features.data()[k] == base.data()[k]);
}

TEST_CASE("assemble_anchors: three copies of a 64 batch give 256 anchors") {
    Rng rng(2);
    const Matrix base = test::random_matrix(rng, 64, 2);
    const AnchorSet a = assemble_anchors(base, 3, 0.05, rng);
    CHECK(a.size() == 256);
    CHECK(a.base_count() == 64);
    for (std::size_t i = 64; i < 256; ++i)
        CHECK(a.augmented_from[i] == static_cast<std::ptrdiff_t>(i % 64));
}

TEST_CASE("assemble_anchors: zero sigma duplicates preserve the KDE value") {
    Rng rng(3);
    const Matrix base = test::random_unit_rows(rng, 5, 3);
    const AnchorSet dup = assemble_anchors(base, 1, 0.0, rng);
    const AnchorSet plain = AnchorSet::from_matrix(base, AnchorSet::Origin::real);
    const KernelSpec spec = KernelSpec::vmf(0.8);
    for (int c = 0; c < 10; ++c) {
        const Vector q = test::random_unit_vector(rng, 3);
        CHECK(log_kde(spec, dup, q) == doctest::Approx(log_kde(spec, plain, q)).epsilon(1e-12));
    }
}

TEST_CASE("TrainConfig: validation catches inconsistent setups") {
    TrainConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());

    TrainConfig stale = small_config();
    stale.weights = LossWeights{0.0, 1.0, 0.0, 1.0, 1e-3};
    stale.stale_real_features = true;
    CHECK_THROWS_AS(stale.validate(), std::invalid_argument);

    TrainConfig tiny = small_config();
    tiny.batch_size = 1;
    CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);

    TrainConfig proj = small_config();
    proj.projection = true;
    CHECK_THROWS_AS(proj.validate(), std::invalid_argument);

    TrainConfig tau = small_config();
    tau.kernel = KernelSpec::vmf(2.0);
    CHECK_THROWS_AS(tau.validate(), std::invalid_argument);
}

TEST_CASE("train: zero iterations leaves the initial state") {
    TrainConfig cfg = small_config();
    cfg.n_iters = 0;
    std::optional<TrainState> state;
    const TrainHistory h = train(cfg, &state);
    CHECK(h.records.empty());
    CHECK(h.g_checksums.size() == 1);
    CHECK(h.g_checksums[0] == param_checksum(state->gen.net));
}

TEST_CASE("train: identical seeds give identical histories") {
    const TrainConfig cfg = small_config();
    const TrainHistory a = train(cfg);
    const TrainHistory b = train(cfg);
    REQUIRE(a.g_checksums.size() == b.g_checksums.size());
    for (std::size_t i = 0; i < a.g_checksums.size(); ++i) {
        CHECK(a.g_checksums[i] == b.g_checksums[i]);
        CHECK(a.d_checksums[i] == b.d_checksums[i]);
    }
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].d_loss == b.records[i].d_loss);
        CHECK(a.records[i].g_loss == b.records[i].g_loss);
        CHECK(a.records[i].frechet == b.records[i].frechet);
    }
}

TEST_CASE("train: hinge-only joint run reproduces the hinge baseline bit-exactly") {
    TrainConfig cfg = small_config();
    cfg.weights = LossWeights{0.0, 1.0, 0.0, 1.0, 1e-3};
    cfg.augmentation_factor = 0;
    cfg.n_iters = 50;

    const TrainHistory joint = train(cfg);
    const TrainHistory baseline = train_hinge_baseline(cfg);
    REQUIRE(joint.g_checksums.size() == baseline.g_checksums.size());
    for (std::size_t i = 0; i < joint.g_checksums.size(); ++i) {
        CHECK(joint.g_checksums[i] == baseline.g_checksums[i]);
        CHECK(joint.d_checksums[i] == baseline.d_checksums[i]);
    }
    REQUIRE(joint.records.size() == baseline.records.size());
    for (std::size_t i = 0; i < joint.records.size(); ++i) {
        CHECK(joint.records[i].d_loss == baseline.records[i].d_loss);
        CHECK(joint.records[i].g_loss == baseline.records[i].g_loss);
    }
}

TEST_CASE("train: records carry finite metrics at the logging cadence") {
    TrainConfig cfg = small_config();
    cfg.n_iters = 25;
    cfg.metrics_every = 10;
    const TrainHistory h = train(cfg);
    REQUIRE(h.records.size() == 3);  // 10, 20, 25 (final)
    CHECK(h.records[0].iter == 10);
    CHECK(h.records[1].iter == 20);
    CHECK(h.records[2].iter == 25);
    for (const TrainRecord& r : h.records) {
        CHECK(std::isfinite(r.d_loss));
        CHECK(std::isfinite(r.g_loss));
        CHECK(std::isfinite(r.density));
        CHECK(std::isfinite(r.coverage));
        CHECK(std::isfinite(r.frechet));
        CHECK(r.mode_coverage >= 0.0);
        CHECK(r.mode_coverage <= 1.0);
        CHECK(r.coverage >= 0.0);
        CHECK(r.coverage <= 1.0);
    }
}

TEST_CASE("stale cache: generator step consumes the recorded features") {
    TrainConfig cfg = small_config();
    cfg.stale_real_features = true;
    cfg.augmentation_factor = 1;

    TrainState state = init_train_state(cfg);
    CHECK_THROWS_AS(generator_step(state, cfg), std::runtime_error);  // cache empty

    discriminator_step(state, cfg);
    REQUIRE(state.stale_real.has_value());
    const AnchorSet cached = *state.stale_real;

    // Replicate the generator step on a clone, feeding the cached anchors to
    // the loss manually; the real trainer step must produce the same value.
    TrainState clone = state;
    const std::size_t nb = cfg.batch_size;
    Matrix z(nb, cfg.latent_dim);
    for (double& v : z.data()) v = clone.latent_rng.normal();
    const Matrix x_g = generator_forward(clone.gen, z);
    const AnchorSet gen_data =
        assemble_anchors(x_g, cfg.augmentation_factor, cfg.augmentation_sigma, clone.aug_rng,
                         AnchorSet::Origin::generated);
    const FeatureMapResult fg = feature_map_apply(clone.fm, gen_data.features);
    AnchorSet gen_anchors{fg.phi, AnchorSet::Origin::generated, gen_data.augmented_from};
    Matrix queries(nb, fg.phi.cols());
    for (std::size_t j = 0; j < nb; ++j) queries.set_row(j, fg.phi.row(j));
    const double expected =
        kdd_g_loss(queries, cached, gen_anchors, cfg.kernel, cfg.leave_one_out).value;

    const StepLosses gl = generator_step(state, cfg);
    CHECK(gl.kdd == expected);
}

TEST_CASE("trainer: kdd generator gradients vary per sample while hinge ones do not") {
    // Covered analytically in the loss tests; here just confirm a KDD run and
    // a hinge run both make progress without aborting.
    TrainConfig kdd_cfg = small_config();
    kdd_cfg.n_iters = 10;
    const TrainHistory kdd_hist = train(kdd_cfg);
    CHECK_FALSE(kdd_hist.aborted);

    TrainConfig hinge_cfg = small_config();
    hinge_cfg.weights = LossWeights{0.0, 1.0, 0.0, 1.0, 1e-3};
    hinge_cfg.n_iters = 10;
    const TrainHistory hinge_hist = train(hinge_cfg);
    CHECK_FALSE(hinge_hist.aborted);
}

TEST_CASE("trainer: divergence aborts with a diagnostic record") {
    // Unnormalized features with an enormous step size overflow within a few
    // iterations; the loop must stop with a recorded reason, not limp on.
    TrainConfig cfg = small_config();
    cfg.kernel = KernelSpec::gaussian(1.0);
    cfg.normalize_features = false;
    cfg.g_opt = OptimizerConfig{OptimizerConfig::Kind::sgd, 1e30};
    cfg.d_opt = OptimizerConfig{OptimizerConfig::Kind::sgd, 1e30};
    cfg.n_iters = 50;
    const TrainHistory h = train(cfg);
    CHECK(h.aborted);
    CHECK_FALSE(h.abort_reason.empty());
}

TEST_CASE("trainer: conditional + projection path runs and stays finite") {
    TrainConfig cfg = small_config();
    cfg.conditional = true;
    cfg.projection = true;
    cfg.weights = LossWeights{1.0, 1.0, 1e-5, 1.0, 1e-3};
    cfg.n_iters = 8;
    cfg.metrics_every = 4;
    const TrainHistory h = train(cfg);
    CHECK_FALSE(h.aborted);
    CHECK_FALSE(h.records.empty());
}

TEST_CASE("trainer: dagger variant stays finite and differs from the fresh path") {
    TrainConfig fresh = small_config();
    fresh.n_iters = 12;
    TrainConfig stale = fresh;
    stale.stale_real_features = true;

    const TrainHistory a = train(fresh);
    const TrainHistory b = train(stale);
    CHECK_FALSE(a.aborted);
    CHECK_FALSE(b.aborted);
    // Different anchor choices must lead to different trajectories.
    CHECK(a.g_checksums.back() != b.g_checksums.back());
}
