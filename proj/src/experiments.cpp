#include "kdd/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "kdd/csv.hpp"
#include "kdd/metrics.hpp"
#include "kdd/numerics.hpp"
#include "kdd/svg.hpp"

namespace kdd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// appendix-a experiment
// ---------------------------------------------------------------------------

void AppendixAConfig::validate() const {
    if (n_points < 2) throw std::invalid_argument("appendix-a: need at least 2 points per cloud");
    if (!(mode_sigma > 0.0)) throw std::invalid_argument("appendix-a: mode_sigma must be > 0");
    if (!(square_half_width > 0.0))
        throw std::invalid_argument("appendix-a: square_half_width must be > 0");
    if (!(classifier_lr > 0.0) || !(feature_lr > 0.0))
        throw std::invalid_argument("appendix-a: learning rates must be > 0");
    if (!(kernel_sigma > 0.0)) throw std::invalid_argument("appendix-a: kernel_sigma must be > 0");
    if (mode_a.size() != 2 || mode_b.size() != 2 || square_center.size() != 2)
        throw std::invalid_argument("appendix-a: 2D geometry expected");
}

namespace {

struct LinearClassifier {
    Vector w;
    double b = 0.0;
    std::size_t steps = 0;
    double loss = 0.0;
};

double classifier_hinge_loss(const Matrix& real, const Matrix& fake, const Vector& w, double b,
                             Vector& grad_w, double& grad_b) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    grad_b = 0.0;
    double loss = 0.0;
    const double inv_r = 1.0 / static_cast<double>(real.rows());
    for (std::size_t i = 0; i < real.rows(); ++i) {
        const double m = 1.0 - (dot(w, real.row(i)) + b);
        if (m > 0.0) {
            loss += m * inv_r;
            axpy(-inv_r, real.row(i), grad_w);
            grad_b -= inv_r;
        }
    }
    const double inv_f = 1.0 / static_cast<double>(fake.rows());
    for (std::size_t i = 0; i < fake.rows(); ++i) {
        const double m = 1.0 + dot(w, fake.row(i)) + b;
        if (m > 0.0) {
            loss += m * inv_f;
            axpy(inv_f, fake.row(i), grad_w);
            grad_b += inv_f;
        }
    }
    return loss;
}

// Gradient descent until the loss improves by less than tol over the patience
// window (the objective is piecewise linear, so it plateaus rather than
// converging smoothly).
LinearClassifier fit_linear_classifier(const AppendixAConfig& cfg, const Matrix& real,
                                       const Matrix& fake) {
    LinearClassifier clf;
    clf.w.assign(2, 0.0);

    Vector grad_w(2, 0.0);
    double grad_b = 0.0;
    std::vector<double> loss_window;
    loss_window.reserve(cfg.classifier_max_steps + 1);

    clf.loss = classifier_hinge_loss(real, fake, clf.w, clf.b, grad_w, grad_b);
    loss_window.push_back(clf.loss);
    while (clf.steps < cfg.classifier_max_steps) {
        axpy(-cfg.classifier_lr, grad_w, clf.w);
        clf.b -= cfg.classifier_lr * grad_b;
        ++clf.steps;

        clf.loss = classifier_hinge_loss(real, fake, clf.w, clf.b, grad_w, grad_b);
        if (!std::isfinite(clf.loss))
            throw std::runtime_error("appendix-a: classifier diverged (non-finite loss)");
        loss_window.push_back(clf.loss);

        if (clf.steps >= cfg.classifier_patience) {
            const double before = loss_window[clf.steps - cfg.classifier_patience];
            if (before - clf.loss < cfg.classifier_tol) break;
        }
    }
    return clf;
}

double frac_within_3sigma(const Matrix& pts, const Matrix& centers, double sigma) {
    const double r2 = 9.0 * sigma * sigma;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        double best = squared_distance(pts.row(i), centers.row(0));
        for (std::size_t m = 1; m < centers.rows(); ++m)
            best = std::min(best, squared_distance(pts.row(i), centers.row(m)));
        if (best <= r2) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pts.rows());
}

Vector per_mode_fractions(const Matrix& pts, const Matrix& centers, double sigma) {
    const double r2 = 9.0 * sigma * sigma;
    Vector frac(centers.rows(), 0.0);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        std::size_t best = 0;
        double best_d2 = squared_distance(pts.row(i), centers.row(0));
        for (std::size_t m = 1; m < centers.rows(); ++m) {
            const double d2 = squared_distance(pts.row(i), centers.row(m));
            if (d2 < best_d2) {
                best_d2 = d2;
                best = m;
            }
        }
        if (best_d2 <= r2) frac[best] += 1.0;
    }
    for (double& f : frac) f /= static_cast<double>(pts.rows());
    return frac;
}

double max_pairwise_change(const Matrix& before, const Matrix& after) {
    double worst = 0.0;
    for (std::size_t i = 0; i < before.rows(); ++i) {
        for (std::size_t j = i + 1; j < before.rows(); ++j) {
            const double d0 = std::sqrt(squared_distance(before.row(i), before.row(j)));
            const double d1 = std::sqrt(squared_distance(after.row(i), after.row(j)));
            worst = std::max(worst, std::abs(d1 - d0));
        }
    }
    return worst;
}

}  // namespace

AppendixAResult run_appendix_a(const AppendixAConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    AppendixAResult res;

    // Real cloud: two Gaussian modes, half the points each.
    const Vector sigma2(2, cfg.mode_sigma);
    const std::size_t n_a = cfg.n_points / 2;
    const Matrix cloud_a = sample_gaussian(rng, n_a, cfg.mode_a, sigma2);
    const Matrix cloud_b = sample_gaussian(rng, cfg.n_points - n_a, cfg.mode_b, sigma2);
    res.real = Matrix(cfg.n_points, 2);
    for (std::size_t i = 0; i < n_a; ++i) res.real.set_row(i, cloud_a.row(i));
    for (std::size_t i = n_a; i < cfg.n_points; ++i) res.real.set_row(i, cloud_b.row(i - n_a));

    res.fake_initial = sample_uniform_square(rng, cfg.n_points, cfg.square_center,
                                             cfg.square_half_width);

    const LinearClassifier clf = fit_linear_classifier(cfg, res.real, res.fake_initial);
    res.w = clf.w;
    res.b = clf.b;
    res.classifier_steps = clf.steps;
    res.classifier_loss = clf.loss;

    // Feature optimization: the fake points are the features.
    Matrix fake = res.fake_initial;
    const std::size_t n = fake.rows();
    const KernelSpec kernel = KernelSpec::gaussian(cfg.kernel_sigma);
    const AnchorSet real_anchors = AnchorSet::from_matrix(res.real, AnchorSet::Origin::real);

    res.max_displacement_spread = 0.0;
    for (std::size_t step = 0; step < cfg.feature_steps; ++step) {
        Matrix grad(n, 2);
        if (cfg.loss == AppendixAConfig::Loss::hinge) {
            // L_G = -mean(<w, x> + b): the same gradient -w/n for every point.
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < 2; ++j) grad(i, j) = -res.w[j] * inv_n;
        } else {
            const AnchorSet gen_anchors = AnchorSet::from_matrix(fake, AnchorSet::Origin::generated);
            const LossResult g =
                kdd_g_loss(fake, real_anchors, gen_anchors, kernel, cfg.leave_one_out);
            grad = g.grad_gen_features;
        }

        // SGD on the points; track how rigid the per-step displacement is.
        Matrix displaced = fake;
        for (std::size_t i = 0; i < n; ++i)
            axpy(-cfg.feature_lr, grad.row(i), displaced.row(i));
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                const double di = displaced(i, j) - fake(i, j);
                const double d0 = displaced(0, j) - fake(0, j);
                spread = std::max(spread, std::abs(di - d0));
            }
        res.max_displacement_spread = std::max(res.max_displacement_spread, spread);
        fake = std::move(displaced);
    }
    res.fake_final = std::move(fake);

    Matrix centers(2, 2);
    centers.set_row(0, cfg.mode_a);
    centers.set_row(1, cfg.mode_b);
    res.max_pairwise_distance_change = max_pairwise_change(res.fake_initial, res.fake_final);
    res.frac_3sigma_initial = frac_within_3sigma(res.fake_initial, centers, cfg.mode_sigma);
    res.frac_3sigma_final = frac_within_3sigma(res.fake_final, centers, cfg.mode_sigma);
    res.mode_frac_initial = per_mode_fractions(res.fake_initial, centers, cfg.mode_sigma);
    res.mode_frac_final = per_mode_fractions(res.fake_final, centers, cfg.mode_sigma);
    return res;
}

namespace {

void write_cloud_csv(const std::string& path, const Matrix& real, const Matrix& fake) {
    csv::Writer w({"x", "y", "cloud"});
    for (std::size_t i = 0; i < real.rows(); ++i)
        w.add_row({csv::fmt(real(i, 0)), csv::fmt(real(i, 1)), "real"});
    for (std::size_t i = 0; i < fake.rows(); ++i)
        w.add_row({csv::fmt(fake(i, 0)), csv::fmt(fake(i, 1)), "fake"});
    w.save(path);
}

// Two endpoints of the decision line w.x + b = 0 clipped to the data extent.
std::vector<std::pair<double, double>> boundary_segment(const Vector& w, double b,
                                                        const Matrix& pts) {
    double xmin = pts(0, 0), xmax = pts(0, 0), ymin = pts(0, 1), ymax = pts(0, 1);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        xmin = std::min(xmin, pts(i, 0));
        xmax = std::max(xmax, pts(i, 0));
        ymin = std::min(ymin, pts(i, 1));
        ymax = std::max(ymax, pts(i, 1));
    }
    if (std::abs(w[1]) >= std::abs(w[0])) {
        auto y_of = [&](double x) { return -(b + w[0] * x) / w[1]; };
        return {{xmin, y_of(xmin)}, {xmax, y_of(xmax)}};
    }
    auto x_of = [&](double y) { return -(b + w[1] * y) / w[0]; };
    return {{x_of(ymin), ymin}, {x_of(ymax), ymax}};
}

void write_cloud_svg(const std::string& path, const Matrix& real, const Matrix& fake,
                     const std::vector<std::pair<double, double>>& line,
                     const std::string& title) {
    std::vector<svg::Series> series(2);
    series[0].label = "real";
    series[0].color = "#1f77b4";
    for (std::size_t i = 0; i < real.rows(); ++i) series[0].points.emplace_back(real(i, 0), real(i, 1));
    series[1].label = "fake";
    series[1].color = "#ff7f0e";
    for (std::size_t i = 0; i < fake.rows(); ++i) series[1].points.emplace_back(fake(i, 0), fake(i, 1));

    std::vector<svg::Line> lines;
    if (!line.empty()) lines.push_back({"#2ca02c", line});

    svg::PlotSpec spec;
    spec.title = title;
    svg::save(path, svg::render_scatter(series, lines, spec));
}

}  // namespace

void write_appendix_a_outputs(const AppendixAConfig& cfg, const AppendixAResult& res,
                              const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto p = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    write_cloud_csv(p("initial.csv"), res.real, res.fake_initial);
    write_cloud_csv(p("final.csv"), res.real, res.fake_final);

    const auto seg = boundary_segment(res.w, res.b, res.real);
    csv::Writer boundary({"x", "y"});
    for (const auto& [x, y] : seg) boundary.add_row({csv::fmt(x), csv::fmt(y)});
    boundary.save(p("boundary.csv"));

    csv::Writer report({"metric", "value"});
    const char* loss_name = cfg.loss == AppendixAConfig::Loss::hinge ? "hinge" : "kdd";
    report.add_row({"loss", loss_name});
    report.add_row({"seed", std::to_string(cfg.seed)});
    report.add_row({"classifier_steps", std::to_string(res.classifier_steps)});
    report.add_row({"classifier_loss", csv::fmt(res.classifier_loss)});
    report.add_row({"w0", csv::fmt(res.w[0])});
    report.add_row({"w1", csv::fmt(res.w[1])});
    report.add_row({"b", csv::fmt(res.b)});
    report.add_row({"max_pairwise_distance_change", csv::fmt(res.max_pairwise_distance_change)});
    report.add_row({"max_displacement_spread", csv::fmt(res.max_displacement_spread)});
    report.add_row({"frac_3sigma_initial", csv::fmt(res.frac_3sigma_initial)});
    report.add_row({"frac_3sigma_final", csv::fmt(res.frac_3sigma_final)});
    for (std::size_t m = 0; m < res.mode_frac_initial.size(); ++m) {
        report.add_row({"mode" + std::to_string(m) + "_frac_initial",
                        csv::fmt(res.mode_frac_initial[m])});
        report.add_row({"mode" + std::to_string(m) + "_frac_final",
                        csv::fmt(res.mode_frac_final[m])});
    }
    report.save(p("report.csv"));

    write_cloud_svg(p("plot_initial.svg"), res.real, res.fake_initial, seg, "initial");
    write_cloud_svg(p("plot_final.svg"), res.real, res.fake_final, seg,
                    std::string("final (") + loss_name + ")");
}

// ---------------------------------------------------------------------------
// toy-GAN comparison
// ---------------------------------------------------------------------------

ToyGanPreset preset_by_name(const std::string& name) {
    ToyGanPreset p;
    p.name = name;
    if (name == "hinge") {
        p.weights = LossWeights{0.0, 1.0, 0.0, 1.0, 1e-3};
        p.augmentation_factor = 0;
        return p;
    }
    if (name == "kdd") {
        p.weights = LossWeights{1.0, 0.0, 0.0, 1.0, 1e-3};
        p.augmentation_factor = 1;
        return p;
    }
    if (name == "joint") {
        p.weights = LossWeights{1.0, 1.0, 0.0, 1.0, 1e-3};
        p.augmentation_factor = 1;
        return p;
    }
    if (name == "joint-dagger") {
        p.weights = LossWeights{1.0, 1.0, 0.0, 1.0, 1e-3};
        p.augmentation_factor = 1;
        p.stale_real_features = true;
        return p;
    }
    if (name == "kdd-tau-0.05") {
        p.weights = LossWeights{1.0, 0.0, 0.0, 0.05, 1e-3};
        p.augmentation_factor = 1;
        return p;
    }
    if (name == "kdd-tau-5") {
        p.weights = LossWeights{1.0, 0.0, 0.0, 5.0, 1e-3};
        p.augmentation_factor = 1;
        return p;
    }
    if (name == "kdd-jac") {
        p.weights = LossWeights{1.0, 0.0, 1e-5, 1.0, 1e-3};
        p.augmentation_factor = 1;
        return p;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

TrainConfig apply_preset(const TrainConfig& base, const ToyGanPreset& preset) {
    TrainConfig cfg = base;
    cfg.weights = preset.weights;
    cfg.augmentation_factor = preset.augmentation_factor;
    cfg.leave_one_out = preset.leave_one_out;
    cfg.stale_real_features = preset.stale_real_features;
    if (cfg.kernel.is_vmf()) cfg.kernel = KernelSpec::vmf(preset.weights.tau);
    return cfg;
}

namespace {

const std::vector<std::string> kHistoryColumns = {
    "iter",        "d_loss",      "d_kdd",   "d_hinge",  "d_jac",
    "g_loss",      "g_kdd",       "g_hinge", "d_grad_norm", "g_grad_norm",
    "density",     "coverage",    "frechet", "mode_coverage"};

void write_history_csv(const TrainHistory& h, const std::string& path) {
    csv::Writer w(kHistoryColumns);
    for (const TrainRecord& r : h.records)
        w.add_numeric_row(std::vector<double>{static_cast<double>(r.iter), r.d_loss, r.d_kdd, r.d_hinge,
                                      r.d_jac, r.g_loss, r.g_kdd, r.g_hinge, r.d_grad_norm,
                                      r.g_grad_norm, r.density, r.coverage, r.frechet,
                                      r.mode_coverage});
    w.save(path);
}

constexpr std::uint64_t kFinalSampleStream = 7;

}  // namespace

ToyGanResult run_toy_gan(const TrainConfig& base, const std::vector<ToyGanPreset>& presets,
                         const std::string& out_dir) {
    if (presets.empty()) throw std::invalid_argument("run_toy_gan: no presets given");

    ToyGanResult result;
    const bool emit = !out_dir.empty();
    if (emit) fs::create_directories(out_dir);

    std::string timing_log;
    for (const ToyGanPreset& preset : presets) {
        const TrainConfig cfg = apply_preset(base, preset);
        cfg.validate();

        const auto t0 = std::chrono::steady_clock::now();
        std::optional<TrainState> state;
        const TrainHistory history = train(cfg, &state);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        PresetSummary summary;
        summary.name = preset.name;
        summary.aborted = history.aborted;
        summary.wall_seconds = secs;
        if (!history.records.empty()) summary.final_record = history.records.back();
        result.presets.push_back(summary);

        timing_log += preset.name + ": " + std::to_string(secs) + " s\n";

        if (emit) {
            const fs::path dir = fs::path(out_dir) / preset.name;
            fs::create_directories(dir);
            write_history_csv(history, (dir / "history.csv").string());

            Rng sample_rng = Rng(cfg.seed).derive(kFinalSampleStream);
            const Matrix fake = sample_generated(*state, cfg, cfg.metrics_samples, sample_rng);
            csv::Writer samples({"x", "y"});
            for (std::size_t i = 0; i < fake.rows(); ++i)
                samples.add_numeric_row(std::vector<double>{fake(i, 0), fake(i, 1)});
            samples.save((dir / "samples_final.csv").string());

            Rng real_rng = Rng(cfg.seed).derive(kFinalSampleStream + 1);
            const Matrix real = sample_data(cfg.data, cfg.metrics_samples, real_rng).points;
            write_cloud_svg((dir / "plot.svg").string(), real, fake, {}, preset.name);
        }
    }

    if (emit) {
        csv::Writer summary({"preset", "iter", "d_loss", "g_loss", "density", "coverage",
                             "frechet", "mode_coverage", "aborted"});
        for (const PresetSummary& s : result.presets) {
            const TrainRecord& r = s.final_record;
            summary.add_row({s.name, std::to_string(r.iter), csv::fmt(r.d_loss),
                             csv::fmt(r.g_loss), csv::fmt(r.density), csv::fmt(r.coverage),
                             csv::fmt(r.frechet), csv::fmt(r.mode_coverage),
                             s.aborted ? "1" : "0"});
        }
        summary.save((fs::path(out_dir) / "summary.csv").string());

        std::ofstream timing((fs::path(out_dir) / "timing.txt").string());
        timing << timing_log;
    }
    return result;
}

// ---------------------------------------------------------------------------
// gradient-check suite
// ---------------------------------------------------------------------------

namespace {

double rel_err(std::span<const double> analytic, std::span<const double> fd) {
    double scale = 1.0;
    for (double f : fd) scale = std::max(scale, std::abs(f));
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, std::abs(analytic[i] - fd[i]));
    return worst / scale;
}

Vector random_unit(Rng& rng, std::size_t dim) { return sample_unit_direction(rng, dim); }

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t dim) {
    Matrix m(n, dim);
    for (std::size_t i = 0; i < n; ++i) m.set_row(i, random_unit(rng, dim));
    return m;
}

Matrix random_rows(Rng& rng, std::size_t n, std::size_t dim, double scale = 1.0) {
    Matrix m(n, dim);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

Vector flatten2(const Matrix& a, const Matrix& b) {
    Vector v;
    v.reserve(a.size() + b.size());
    v.insert(v.end(), a.data().begin(), a.data().end());
    v.insert(v.end(), b.data().begin(), b.data().end());
    return v;
}

// One generic FD-vs-analytic comparison; both sides flattened.
struct FdCheck {
    double worst = 0.0;
    void update(std::span<const double> analytic, std::span<const double> fd) {
        worst = std::max(worst, rel_err(analytic, fd));
    }
};

// Margins |1 +- ratio| of a kdd_d configuration; FD probes must stay on one
// side of every hinge kink.
bool kdd_d_margins_clean(const KddDLossResult& res, double min_margin) {
    for (double r : res.log_ratio_gen)
        if (std::abs(1.0 + r) < min_margin) return false;
    for (double r : res.log_ratio_real)
        if (std::abs(1.0 - r) < min_margin) return false;
    return true;
}

double check_hinge_d(Rng& rng, std::size_t cases) {
    FdCheck check;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t nr = 1 + rng.next_below(6);
        const std::size_t nf = 1 + rng.next_below(6);
        Vector sr(nr), sf(nf);
        do {
            for (double& s : sr) s = rng.uniform(-2.5, 2.5);
            for (double& s : sf) s = rng.uniform(-2.5, 2.5);
        } while ([&] {
            for (double s : sr)
                if (std::abs(1.0 - s) < 1e-3) return true;
            for (double s : sf)
                if (std::abs(1.0 + s) < 1e-3) return true;
            return false;
        }());

        const HingeDLoss h = hinge_d_loss(sr, sf);
        Vector analytic = h.grad_real;
        analytic.insert(analytic.end(), h.grad_fake.begin(), h.grad_fake.end());

        Vector x = sr;
        x.insert(x.end(), sf.begin(), sf.end());
        const Vector fd = finite_diff_grad(
            [&](const Vector& v) {
                const std::span<const double> all(v);
                return hinge_d_loss(all.subspan(0, nr), all.subspan(nr)).value;
            },
            x);
        check.update(analytic, fd);
    }
    return check.worst;
}

double check_hinge_g(Rng& rng, std::size_t cases) {
    FdCheck check;
    for (std::size_t c = 0; c < cases; ++c) {
        Vector s(1 + rng.next_below(6));
        for (double& v : s) v = rng.uniform(-2.0, 2.0);
        const HingeGLoss h = hinge_g_loss(s);
        const Vector fd =
            finite_diff_grad([](const Vector& v) { return hinge_g_loss(v).value; }, s);
        check.update(h.grad_fake, fd);
    }
    return check.worst;
}

KernelSpec random_kernel(Rng& rng, bool vmf) {
    return vmf ? KernelSpec::vmf(rng.uniform(0.5, 2.0))
               : KernelSpec::gaussian(rng.uniform(0.7, 1.5));
}

double check_kdd_d(Rng& rng, std::size_t cases, bool vmf) {
    FdCheck check;
    const std::size_t dims[] = {2, 3, 8};
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t k = dims[rng.next_below(3)];
        const std::size_t nr = 2 + rng.next_below(4);
        const std::size_t ng = 2 + rng.next_below(4);
        const bool loo = rng.next_below(2) == 0;
        const KernelSpec spec = random_kernel(rng, vmf);

        Matrix real, gen;
        KddDLossResult probe;
        do {
            real = vmf ? random_unit_rows(rng, nr, k) : random_rows(rng, nr, k);
            gen = vmf ? random_unit_rows(rng, ng, k) : random_rows(rng, ng, k);
            probe = kdd_d_loss_anchored(spec, AnchorSet::from_matrix(real, AnchorSet::Origin::real),
                                        AnchorSet::from_matrix(gen, AnchorSet::Origin::generated),
                                        loo, nr, ng);
        } while (!kdd_d_margins_clean(probe, 1e-3));

        const Vector analytic = flatten2(probe.grad_real, probe.grad_gen);
        const Vector fd = finite_diff_grad(
            [&](const Vector& v) {
                Matrix r(nr, k), g(ng, k);
                std::copy(v.begin(), v.begin() + nr * k, r.data().begin());
                std::copy(v.begin() + nr * k, v.end(), g.data().begin());
                return kdd_d_loss(r, g, spec, loo).value;
            },
            flatten2(real, gen));
        check.update(analytic, fd);
    }
    return check.worst;
}

double check_kdd_g(Rng& rng, std::size_t cases, bool vmf) {
    FdCheck check;
    const std::size_t dims[] = {2, 3, 8};
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t k = dims[rng.next_below(3)];
        const std::size_t nr = 1 + rng.next_below(5);
        const std::size_t ng = 2 + rng.next_below(4);
        const bool loo = rng.next_below(2) == 0;
        const KernelSpec spec = random_kernel(rng, vmf);

        const Matrix real = vmf ? random_unit_rows(rng, nr, k) : random_rows(rng, nr, k);
        const Matrix gen = vmf ? random_unit_rows(rng, ng, k) : random_rows(rng, ng, k);
        const AnchorSet real_anchors = AnchorSet::from_matrix(real, AnchorSet::Origin::real);

        const LossResult res = kdd_g_loss(
            gen, real_anchors, AnchorSet::from_matrix(gen, AnchorSet::Origin::generated), spec,
            loo);
        const Vector fd = finite_diff_grad(
            [&](const Vector& v) {
                Matrix g(ng, k);
                g.data() = v;
                return kdd_g_loss(g, real_anchors,
                                  AnchorSet::from_matrix(g, AnchorSet::Origin::generated), spec,
                                  loo)
                    .value;
            },
            gen.data());
        check.update(res.grad_gen_features.data(), fd);
    }
    return check.worst;
}

double check_conditional(Rng& rng, std::size_t cases) {
    FdCheck check;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t classes = 2 + rng.next_below(4);
        const std::size_t k = 2 + rng.next_below(6);
        const std::size_t hot = rng.next_below(classes);
        Vector label(classes, 0.0);
        label[hot] = 1.0;
        const Matrix v = random_rows(rng, classes, k);
        Vector f(k);
        for (double& x : f) x = rng.normal();

        const ConditionalResult res = conditional_logratio(label, v, f);
        Vector analytic = res.grad_features;
        analytic.insert(analytic.end(), res.grad_embedding.data().begin(),
                        res.grad_embedding.data().end());

        Vector x = f;
        x.insert(x.end(), v.data().begin(), v.data().end());
        const Vector fd = finite_diff_grad(
            [&](const Vector& y) {
                Vector feat(y.begin(), y.begin() + k);
                Matrix emb(classes, k);
                std::copy(y.begin() + k, y.end(), emb.data().begin());
                return conditional_logratio(label, emb, feat).value;
            },
            x);
        check.update(analytic, fd);
    }
    return check.worst;
}

double check_jacobian(Rng& rng, std::size_t cases) {
    FdCheck check;
    for (std::size_t c = 0; c < cases; ++c) {
        Mlp net = Mlp::init({2, 5, 3}, Activation::tanh, rng);
        const Matrix batch = random_rows(rng, 4, 2);
        const double delta = 1e-3;

        Matrix directions(batch.rows(), batch.cols());
        JacobianRegResult probe;
        bool clean = false;
        while (!clean) {
            for (std::size_t i = 0; i < batch.rows(); ++i)
                directions.set_row(i, random_unit(rng, batch.cols()));
            probe = jacobian_reg_with_directions(
                [&net](const Matrix& m) { return mlp_forward(net, m); }, batch, delta, directions);
            clean = true;
            for (std::size_t i = 0; i < batch.rows(); ++i) {
                const double r = std::sqrt(squared_distance(
                    mlp_forward(net, probe.perturbed_inputs).row(i),
                    mlp_forward(net, batch).row(i)));
                if (std::abs(r / delta - 1.0) < 1e-3) clean = false;
            }
        }

        // Analytic parameter gradient via the upstream contract.
        MlpTape tape_base, tape_pert;
        mlp_forward(net, batch, &tape_base);
        mlp_forward(net, probe.perturbed_inputs, &tape_pert);
        MlpGrads grads = mlp_backward(net, tape_base, probe.upstream_base).grads;
        grads.add_scaled(mlp_backward(net, tape_pert, probe.upstream_perturbed).grads, 1.0);

        Vector analytic;
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
            analytic.insert(analytic.end(), grads.weights[l].data().begin(),
                            grads.weights[l].data().end());
            analytic.insert(analytic.end(), grads.biases[l].begin(), grads.biases[l].end());
        }

        Vector params;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            params.insert(params.end(), net.weights[l].data().begin(), net.weights[l].data().end());
            params.insert(params.end(), net.biases[l].begin(), net.biases[l].end());
        }

        const Vector fd = finite_diff_grad(
            [&](const Vector& p) {
                Mlp probe_net = net;
                std::size_t off = 0;
                for (std::size_t l = 0; l < probe_net.layer_count(); ++l) {
                    for (double& x : probe_net.weights[l].data()) x = p[off++];
                    for (double& x : probe_net.biases[l]) x = p[off++];
                }
                return jacobian_reg_with_directions(
                           [&probe_net](const Matrix& m) { return mlp_forward(probe_net, m); },
                           batch, delta, directions)
                    .value;
            },
            params);
        check.update(analytic, fd);
    }
    return check.worst;
}

double check_joint_linearity(Rng& rng, std::size_t cases) {
    double worst = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 2 + rng.next_below(3);
        const std::size_t k = 2 + rng.next_below(3);
        LossResult kdd, hinge;
        kdd.value = rng.normal();
        hinge.value = rng.normal();
        kdd.grad_real_features = random_rows(rng, n, k);
        kdd.grad_gen_features = random_rows(rng, n, k);
        hinge.grad_real_features = random_rows(rng, n, k);
        hinge.grad_gen_features = random_rows(rng, n, k);
        const double jac = std::abs(rng.normal());

        LossWeights w;
        w.gamma = std::abs(rng.normal());
        w.alpha = 1.0;
        w.lambda_jac = std::abs(rng.normal());

        JointParts parts;
        parts.kdd = kdd;
        parts.hinge = hinge;
        parts.jac = jac;
        const LossResult joint = joint_loss(parts, w);

        worst = std::max(worst, std::abs(joint.value - (w.gamma * kdd.value + w.alpha * hinge.value +
                                                        w.lambda_jac * jac)));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                worst = std::max(worst,
                                 std::abs(joint.grad_real_features(i, j) -
                                          (w.gamma * kdd.grad_real_features(i, j) +
                                           w.alpha * hinge.grad_real_features(i, j))));
                worst = std::max(worst, std::abs(joint.grad_gen_features(i, j) -
                                                 (w.gamma * kdd.grad_gen_features(i, j) +
                                                  w.alpha * hinge.grad_gen_features(i, j))));
            }
    }
    return worst;
}

double check_nn_single_anchor(Rng& rng, std::size_t cases) {
    double worst = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
        const bool vmf = rng.next_below(2) == 0;
        const std::size_t k = 2 + rng.next_below(4);
        const KernelSpec spec = random_kernel(rng, vmf);
        const Matrix real = vmf ? random_unit_rows(rng, 1, k) : random_rows(rng, 1, k);
        const Matrix gen = vmf ? random_unit_rows(rng, 1, k) : random_rows(rng, 1, k);
        const Vector query = vmf ? random_unit(rng, k) : [&] {
            Vector q(k);
            for (double& x : q) x = rng.normal();
            return q;
        }();

        const AnchorSet ra = AnchorSet::from_matrix(real, AnchorSet::Origin::real);
        const AnchorSet ga = AnchorSet::from_matrix(gen, AnchorSet::Origin::generated);
        const Vector approx = nn_grad_approx(spec, ra, ga, query);

        // Full per-sample gradient: d(log p_g - log p_r)/d query.
        const auto gg = log_kde_backward(spec, ga, query);
        const auto gr = log_kde_backward(spec, ra, query);
        for (std::size_t j = 0; j < k; ++j)
            worst = std::max(worst, std::abs(approx[j] - (gg.grad_query[j] - gr.grad_query[j])));
    }
    return worst;
}

// Fraction of cases with cosine(nn approx, full gradient) >= 0.99 at low
// temperature. Well-separated regime: anchors spread out within each set and
// the query with an unambiguous nearest anchor in each set (the
// single-dominant-term premise behind the approximation).
double check_nn_cosine_fraction(Rng& rng, std::size_t cases) {
    std::size_t ok = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t k = 3;
        const KernelSpec spec = KernelSpec::vmf(0.01);

        auto separated_set = [&](std::size_t n) {
            Matrix m;
            bool good = false;
            while (!good) {
                m = random_unit_rows(rng, n, k);
                good = true;
                for (std::size_t i = 0; i < n && good; ++i)
                    for (std::size_t j = i + 1; j < n && good; ++j)
                        if (dot(m.row(i), m.row(j)) > 0.5) good = false;
            }
            return m;
        };

        Matrix rm, gm;
        Vector query;
        while (true) {
            rm = separated_set(4);
            gm = separated_set(4);
            bool found = false;
            for (int tries = 0; tries < 40 && !found; ++tries) {
                query = random_unit(rng, k);
                auto nn_gap = [&](const Matrix& m, std::size_t& arg) {
                    Vector s;
                    for (std::size_t i = 0; i < m.rows(); ++i) s.push_back(dot(m.row(i), query));
                    arg = static_cast<std::size_t>(
                        std::max_element(s.begin(), s.end()) - s.begin());
                    Vector t = s;
                    std::sort(t.rbegin(), t.rend());
                    return t[0] - t[1];
                };
                std::size_t ar = 0, ag = 0;
                if (nn_gap(rm, ar) >= 0.03 && nn_gap(gm, ag) >= 0.03 &&
                    dot(rm.row(ar), gm.row(ag)) <= 0.9)
                    found = true;
            }
            if (found) break;
        }
        const AnchorSet ra = AnchorSet::from_matrix(rm, AnchorSet::Origin::real);
        const AnchorSet ga = AnchorSet::from_matrix(gm, AnchorSet::Origin::generated);

        const Vector approx = nn_grad_approx(spec, ra, ga, query);
        const auto gg = log_kde_backward(spec, ga, query);
        const auto gr = log_kde_backward(spec, ra, query);
        Vector full(k);
        for (std::size_t j = 0; j < k; ++j) full[j] = gg.grad_query[j] - gr.grad_query[j];

        const double cos = dot(approx, full) / (norm2(approx) * norm2(full));
        if (cos >= 0.99) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(cases);
}

}  // namespace

bool GradcheckReport::all_pass() const {
    for (const GradcheckRow& r : rows)
        if (!r.pass) return false;
    return true;
}

GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t cases) {
    if (cases == 0) throw std::invalid_argument("run_gradcheck: cases must be >= 1");
    const Rng root(seed);

    GradcheckReport report;
    auto add = [&](const std::string& name, double worst, double threshold, bool higher) {
        GradcheckRow row;
        row.name = name;
        row.cases = cases;
        row.worst = worst;
        row.threshold = threshold;
        row.higher_is_better = higher;
        row.pass = higher ? worst >= threshold : worst <= threshold;
        report.rows.push_back(row);
    };

    Rng r0 = root.derive(10);
    add("hinge_d", check_hinge_d(r0, cases), 1e-5, false);
    Rng r1 = root.derive(11);
    add("hinge_g", check_hinge_g(r1, cases), 1e-5, false);
    Rng r2 = root.derive(12);
    add("kdd_d_vmf", check_kdd_d(r2, cases, true), 1e-5, false);
    Rng r3 = root.derive(13);
    add("kdd_d_gaussian", check_kdd_d(r3, cases, false), 1e-5, false);
    Rng r4 = root.derive(14);
    add("kdd_g_vmf", check_kdd_g(r4, cases, true), 1e-5, false);
    Rng r5 = root.derive(15);
    add("kdd_g_gaussian", check_kdd_g(r5, cases, false), 1e-5, false);
    Rng r6 = root.derive(16);
    add("conditional", check_conditional(r6, cases), 1e-6, false);
    Rng r7 = root.derive(17);
    add("jacobian_reg", check_jacobian(r7, cases), 1e-5, false);
    Rng r8 = root.derive(18);
    add("joint_linearity", check_joint_linearity(r8, cases), 1e-12, false);
    Rng r9 = root.derive(19);
    add("nn_single_anchor", check_nn_single_anchor(r9, cases), 1e-12, false);
    Rng r10 = root.derive(20);
    add("nn_cosine_frac", check_nn_cosine_fraction(r10, cases), 0.95, true);

    return report;
}

void write_gradcheck_csv(const GradcheckReport& report, const std::string& path) {
    csv::Writer w({"check", "cases", "worst", "threshold", "direction", "status"});
    for (const GradcheckRow& r : report.rows)
        w.add_row({r.name, std::to_string(r.cases), csv::fmt(r.worst), csv::fmt(r.threshold),
                   r.higher_is_better ? ">=" : "<=", r.pass ? "pass" : "FAIL"});
    w.save(path);
}

}  // namespace kdd
