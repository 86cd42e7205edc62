// kdd: KDE-based adversarial learning toolbox.
//
// Subcommands: appendix-a, toy-gan, gradcheck, plot. Every command is
// deterministic given (config, seed): CSV/SVG outputs are byte-identical
// across runs; wall-clock timings go to timing.txt only.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "kdd/config.hpp"
#include "kdd/csv.hpp"
#include "kdd/experiments.hpp"
#include "kdd/svg.hpp"

namespace fs = std::filesystem;

namespace {

std::string output_root() {
    if (const char* env = std::getenv("KDD_OUT_ROOT")) return env;
    return "runs";
}

std::string resolve_out(const std::string& out, const std::string& fallback_name) {
    if (!out.empty()) return out;
    return (fs::path(output_root()) / fallback_name).string();
}

int cmd_appendix_a(const std::string& config_path, std::uint64_t seed, bool seed_set,
                   const std::string& loss, const std::string& out) {
    kdd::AppendixAConfig cfg;
    if (!config_path.empty()) cfg = kdd::config::appendix_config_from_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (!loss.empty()) {
        if (loss == "hinge")
            cfg.loss = kdd::AppendixAConfig::Loss::hinge;
        else if (loss == "kdd")
            cfg.loss = kdd::AppendixAConfig::Loss::kdd;
        else
            throw std::runtime_error("--loss must be hinge or kdd");
    }

    const std::string loss_name = cfg.loss == kdd::AppendixAConfig::Loss::hinge ? "hinge" : "kdd";
    const std::string dir = resolve_out(out, "appendix-a-" + loss_name);
    const kdd::AppendixAResult res = kdd::run_appendix_a(cfg);
    kdd::write_appendix_a_outputs(cfg, res, dir);

    std::cout << "appendix-a (" << loss_name << ", seed " << cfg.seed << ") -> " << dir << "\n"
              << "  classifier: " << res.classifier_steps << " steps, loss "
              << res.classifier_loss << "\n"
              << "  max pairwise distance change: " << res.max_pairwise_distance_change << "\n"
              << "  fraction within 3 sigma of a mode: " << res.frac_3sigma_initial << " -> "
              << res.frac_3sigma_final << "\n";
    return 0;
}

int cmd_toy_gan(const std::string& config_path, std::uint64_t seed, bool seed_set,
                std::vector<std::string> preset_names, const std::string& out) {
    kdd::TrainConfig base;
    if (!config_path.empty()) base = kdd::config::train_config_from_file(config_path);
    if (seed_set) base.seed = seed;
    if (preset_names.empty()) preset_names = {"hinge", "kdd"};

    std::vector<kdd::ToyGanPreset> presets;
    for (const std::string& name : preset_names) presets.push_back(kdd::preset_by_name(name));

    const std::string dir = resolve_out(out, "toy-gan");
    const kdd::ToyGanResult result = kdd::run_toy_gan(base, presets, dir);

    std::cout << "toy-gan (seed " << base.seed << ") -> " << dir << "\n";
    for (const kdd::PresetSummary& s : result.presets) {
        std::cout << "  " << s.name << ": mode_coverage " << s.final_record.mode_coverage
                  << ", frechet " << s.final_record.frechet << ", coverage "
                  << s.final_record.coverage << (s.aborted ? "  [ABORTED]" : "") << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t cases, const std::string& out) {
    const kdd::GradcheckReport report = kdd::run_gradcheck(seed, cases);

    const std::string dir = resolve_out(out, "gradcheck");
    fs::create_directories(dir);
    kdd::write_gradcheck_csv(report, (fs::path(dir) / "report.csv").string());

    for (const kdd::GradcheckRow& r : report.rows)
        std::cout << (r.pass ? "pass " : "FAIL ") << r.name << " worst " << r.worst << " ("
                  << (r.higher_is_better ? ">= " : "<= ") << r.threshold << ")\n";
    std::cout << (report.all_pass() ? "gradcheck: all checks passed\n"
                                    : "gradcheck: FAILURES above\n");
    return report.all_pass() ? 0 : 1;
}

int cmd_plot(const std::string& input, const std::string& line_path, const std::string& out,
             const std::string& title) {
    const kdd::csv::Table table = kdd::csv::load(input);
    const std::size_t xc = table.column("x");
    const std::size_t yc = table.column("y");

    // Optional third column groups points into colored series.
    std::size_t group_col = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != xc && c != yc && group_col == table.header.size()) group_col = c;

    const std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::vector<kdd::svg::Series> series;
    auto series_for = [&](const std::string& label) -> kdd::svg::Series& {
        for (auto& s : series)
            if (s.label == label) return s;
        kdd::svg::Series next;
        next.label = label;
        next.color = palette[series.size() % palette.size()];
        series.push_back(next);
        return series.back();
    };

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string label =
            group_col < table.header.size() ? table.rows[r][group_col] : std::string("points");
        series_for(label).points.emplace_back(table.number(r, xc), table.number(r, yc));
    }

    std::vector<kdd::svg::Line> lines;
    if (!line_path.empty()) {
        const kdd::csv::Table lt = kdd::csv::load(line_path);
        const std::size_t lx = lt.column("x");
        const std::size_t ly = lt.column("y");
        kdd::svg::Line l;
        l.color = "#2ca02c";
        for (std::size_t r = 0; r < lt.rows.size(); ++r)
            l.points.emplace_back(lt.number(r, lx), lt.number(r, ly));
        lines.push_back(std::move(l));
    }

    kdd::svg::PlotSpec spec;
    spec.title = title;
    kdd::svg::save(out, kdd::svg::render_scatter(series, lines, spec));
    std::cout << "plot -> " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KDE-based likelihood-ratio adversarial learning toolbox"};
    app.require_subcommand(1);

    std::string config_path, out, loss, input, line_path, title;
    std::uint64_t seed = 1;
    std::size_t cases = 100;
    std::vector<std::string> preset_names;

    auto* appendix = app.add_subcommand("appendix-a", "2D point-cloud experiment");
    appendix->add_option("--config", config_path, "JSON config file");
    auto* appendix_seed = appendix->add_option("--seed", seed, "RNG seed");
    appendix->add_option("--loss", loss, "hinge or kdd");
    appendix->add_option("--out", out, "output directory");

    auto* toygan = app.add_subcommand("toy-gan", "train presets on a toy mixture");
    toygan->add_option("--config", config_path, "JSON config file");
    auto* toygan_seed = toygan->add_option("--seed", seed, "RNG seed");
    toygan->add_option("--preset", preset_names,
                       "preset name (repeatable): hinge, kdd, joint, joint-dagger, "
                       "kdd-tau-0.05, kdd-tau-5, kdd-jac");
    toygan->add_option("--out", out, "output directory");

    auto* gradcheck = app.add_subcommand("gradcheck", "analytic-vs-finite-difference suite");
    gradcheck->add_option("--seed", seed, "RNG seed");
    gradcheck->add_option("--cases", cases, "random cases per check");
    gradcheck->add_option("--out", out, "output directory");

    auto* plot = app.add_subcommand("plot", "render a points CSV as an SVG scatter");
    plot->add_option("--input", input, "points CSV (columns x,y[,group])")->required();
    plot->add_option("--line", line_path, "optional polyline CSV (columns x,y)");
    plot->add_option("--out", out, "output SVG path")->required();
    plot->add_option("--title", title, "plot title");

    CLI11_PARSE(app, argc, argv);

    try {
        if (appendix->parsed())
            return cmd_appendix_a(config_path, seed, !appendix_seed->empty(), loss, out);
        if (toygan->parsed())
            return cmd_toy_gan(config_path, seed, !toygan_seed->empty(), preset_names, out);
        if (gradcheck->parsed()) return cmd_gradcheck(seed, cases, out);
        if (plot->parsed()) return cmd_plot(input, line_path, out, title);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
