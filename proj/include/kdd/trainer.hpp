#pragma once

#include <optional>
#include <string>

#include "kdd/data.hpp"
#include "kdd/kde.hpp"
#include "kdd/losses.hpp"
#include "kdd/models.hpp"

namespace kdd {

struct TrainConfig {
    std::uint64_t seed = 1;
    DataSpec data;
    std::size_t batch_size = 64;
    std::size_t n_iters = 5000;      // generator updates
    std::size_t d_steps_per_g = 1;
    OptimizerConfig g_opt{OptimizerConfig::Kind::adam, 1e-3, 0.5, 0.999, 1e-8};
    OptimizerConfig d_opt{OptimizerConfig::Kind::adam, 1e-3, 0.5, 0.999, 1e-8};
    LossWeights weights;
    KernelSpec kernel = KernelSpec::vmf(1.0);
    std::size_t augmentation_factor = 0;  // N extra jittered copies per batch
    double augmentation_sigma = 0.05;
    bool leave_one_out = true;
    bool conditional = false;   // class label as generator input
    bool projection = false;    // y^T V phi(x) term (requires conditional)
    bool stale_real_features = false;  // dagger variant: reuse last D-step features
    std::size_t metrics_every = 500;   // 0: metrics only at the final record
    std::size_t metrics_samples = 1024;
    std::size_t metrics_knn = 5;

    // architecture (toy defaults)
    std::size_t latent_dim = 2;
    std::vector<std::size_t> g_hidden = {64, 64};
    std::vector<std::size_t> d_hidden = {64, 64};
    std::size_t feature_dim = 2;
    bool normalize_features = true;

    void validate() const;
};

// One logged iteration. All fields are finite; wall_ms is informational and
// never serialized into CSV (outputs must be byte-reproducible).
struct TrainRecord {
    std::size_t iter = 0;
    double d_loss = 0.0, d_kdd = 0.0, d_hinge = 0.0, d_jac = 0.0;
    double g_loss = 0.0, g_kdd = 0.0, g_hinge = 0.0;
    double d_grad_norm = 0.0, g_grad_norm = 0.0;
    double density = 0.0, coverage = 0.0, frechet = 0.0, mode_coverage = 0.0;
    double wall_ms = 0.0;
};

struct TrainHistory {
    std::vector<TrainRecord> records;
    // Per-iteration parameter checksums (after each full G iteration),
    // index 0 is the initial state.
    std::vector<std::uint64_t> g_checksums;
    std::vector<std::uint64_t> d_checksums;
    bool aborted = false;
    std::string abort_reason;
};

struct TrainState {
    Generator gen;
    FeatureMap fm;
    Optimizer g_opt;
    Optimizer d_opt;
    // dagger cache: real-anchor features recorded at the last D step
    std::optional<AnchorSet> stale_real;
    // independent streams so optional code paths never shift each other
    Rng data_rng, latent_rng, aug_rng, jac_rng, eval_rng;
    std::size_t iter = 0;
};

TrainState init_train_state(const TrainConfig& cfg);

struct StepLosses {
    double total = 0.0, kdd = 0.0, hinge = 0.0, jac = 0.0;
    double grad_norm = 0.0;
};

StepLosses discriminator_step(TrainState& state, const TrainConfig& cfg);
StepLosses generator_step(TrainState& state, const TrainConfig& cfg);

// Base batch plus N jittered copies (x + sigma * standard normal), with
// augmented_from recording each copy's base row. Loss evaluation points are
// always the base rows only.
AnchorSet assemble_anchors(const Matrix& base_batch, std::size_t n_copies, double sigma, Rng& rng,
                           AnchorSet::Origin origin = AnchorSet::Origin::real);

// Full bilevel loop: d_steps_per_g discriminator steps then one generator
// step, n_iters times. A NaN in any loss aborts with a diagnostic record.
TrainHistory train(const TrainConfig& cfg, std::optional<TrainState>* out_state = nullptr);

// Plain hinge GAN loop, written without any KDD machinery. The joint trainer
// with (gamma=0, alpha=1, lambda=0) must reproduce its parameter trajectory
// bit-exactly; keeping a second, independent implementation makes that a
// meaningful check.
TrainHistory train_hinge_baseline(const TrainConfig& cfg,
                                  std::optional<TrainState>* out_state = nullptr);

// Fresh generated samples from the current generator (eval stream).
Matrix sample_generated(TrainState& state, const TrainConfig& cfg, std::size_t n, Rng& rng);

}  // namespace kdd
