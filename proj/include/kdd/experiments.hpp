#pragma once

#include <string>

#include "kdd/trainer.hpp"

namespace kdd {

// --- 2D point-cloud experiment ---
//
// Protocol: (1) fit a linear classifier (w, b) separating the real cloud (two
// Gaussian modes) from the fake cloud (uniform square) by gradient descent on
// the hinge objective; (2) freeze it; (3) run feature_steps SGD updates on the
// fake points themselves under the selected loss (the points are the
// features, no network); (4) report geometry diagnostics.
struct AppendixAConfig {
    enum class Loss { hinge, kdd };

    std::uint64_t seed = 1;
    std::size_t n_points = 1000;  // per cloud
    Vector mode_a = {-2.0, 0.0};
    Vector mode_b = {2.0, 0.0};
    double mode_sigma = 0.3;
    Vector square_center = {0.0, -3.0};
    double square_half_width = 1.0;

    double classifier_lr = 0.1;
    double classifier_tol = 1e-8;      // min improvement over the patience window
    std::size_t classifier_patience = 100;
    std::size_t classifier_max_steps = 10000;

    std::size_t feature_steps = 200;
    double feature_lr = 10.0;
    double kernel_sigma = 1.0;  // Gaussian kernel for the KDD run
    Loss loss = Loss::kdd;
    bool leave_one_out = true;  // applies to the fake set

    void validate() const;
};

struct AppendixAResult {
    Matrix real;
    Matrix fake_initial;
    Matrix fake_final;
    Vector w;
    double b = 0.0;
    std::size_t classifier_steps = 0;
    double classifier_loss = 0.0;

    // Geometry diagnostics over the fake cloud.
    double max_pairwise_distance_change = 0.0;
    double max_displacement_spread = 0.0;  // max over steps of the per-point spread
    double frac_3sigma_initial = 0.0;      // fraction within 3 sigma of nearest mode
    double frac_3sigma_final = 0.0;
    Vector mode_frac_initial;  // per-mode share (nearest-mode assignment)
    Vector mode_frac_final;
};

AppendixAResult run_appendix_a(const AppendixAConfig& cfg);

// Writes initial.csv, final.csv, boundary.csv, report.csv plus the two
// scatter plots into out_dir (created if needed).
void write_appendix_a_outputs(const AppendixAConfig& cfg, const AppendixAResult& res,
                              const std::string& out_dir);

// --- toy-GAN comparison ---

struct ToyGanPreset {
    std::string name;
    LossWeights weights;
    std::size_t augmentation_factor = 0;
    bool leave_one_out = true;
    bool stale_real_features = false;
};

// Named presets: hinge, kdd, joint, kdd-tau-0.05, kdd-tau-5, joint-dagger.
ToyGanPreset preset_by_name(const std::string& name);

struct PresetSummary {
    std::string name;
    TrainRecord final_record;
    bool aborted = false;
    double wall_seconds = 0.0;
};

struct ToyGanResult {
    std::vector<PresetSummary> presets;
};

// Trains every preset from the same seed. With a non-empty out_dir, writes
// <preset>/history.csv, <preset>/samples_final.csv, <preset>/plot.svg and a
// shared summary.csv; timings go to timing.txt (never into CSV).
ToyGanResult run_toy_gan(const TrainConfig& base, const std::vector<ToyGanPreset>& presets,
                         const std::string& out_dir);

// Builds the per-preset config (weights, kernel, augmentation, LOO) from the
// shared base.
TrainConfig apply_preset(const TrainConfig& base, const ToyGanPreset& preset);

// --- gradient-check suite ---

struct GradcheckRow {
    std::string name;
    std::size_t cases = 0;
    double worst = 0.0;        // max relative error, or worst fraction/deviation
    double threshold = 0.0;
    bool higher_is_better = false;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    bool all_pass() const;
};

// Compares every analytic gradient against central differences over `cases`
// seeded random configurations per loss, plus the nearest-anchor
// approximation checks. Relative error is max_i |a_i - f_i| / max(1, |f|_inf).
GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t cases);

void write_gradcheck_csv(const GradcheckReport& report, const std::string& path);

}  // namespace kdd
