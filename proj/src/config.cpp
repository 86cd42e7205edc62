#include "kdd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kdd::config {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return json::parse(os.str());
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::runtime_error(std::string("config: unknown ") + what + " key '" + key + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
    const json j = json::parse(text);

    static const std::set<std::string> known = {
        "seed",          "batch_size",      "n_iters",         "d_steps_per_g",
        "gamma",         "alpha",           "lambda_jac",      "tau",
        "delta",         "kernel",          "kernel_sigma",    "augmentation_factor",
        "augmentation_sigma", "leave_one_out", "conditional",  "projection",
        "stale_real_features", "metrics_every", "metrics_samples", "metrics_knn",
        "latent_dim",    "g_hidden",        "d_hidden",        "feature_dim",
        "normalize_features",  "g_lr",      "d_lr",            "optimizer",
        "adam_beta1",    "adam_beta2",      "data",            "ring_modes",
        "ring_radius",   "ring_sigma"};
    reject_unknown(j, known, "train");

    TrainConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "batch_size", cfg.batch_size);
    get_if(j, "n_iters", cfg.n_iters);
    get_if(j, "d_steps_per_g", cfg.d_steps_per_g);
    get_if(j, "gamma", cfg.weights.gamma);
    get_if(j, "alpha", cfg.weights.alpha);
    get_if(j, "lambda_jac", cfg.weights.lambda_jac);
    get_if(j, "tau", cfg.weights.tau);
    get_if(j, "delta", cfg.weights.delta);
    get_if(j, "augmentation_factor", cfg.augmentation_factor);
    get_if(j, "augmentation_sigma", cfg.augmentation_sigma);
    get_if(j, "leave_one_out", cfg.leave_one_out);
    get_if(j, "conditional", cfg.conditional);
    get_if(j, "projection", cfg.projection);
    get_if(j, "stale_real_features", cfg.stale_real_features);
    get_if(j, "metrics_every", cfg.metrics_every);
    get_if(j, "metrics_samples", cfg.metrics_samples);
    get_if(j, "metrics_knn", cfg.metrics_knn);
    get_if(j, "latent_dim", cfg.latent_dim);
    get_if(j, "g_hidden", cfg.g_hidden);
    get_if(j, "d_hidden", cfg.d_hidden);
    get_if(j, "feature_dim", cfg.feature_dim);
    get_if(j, "normalize_features", cfg.normalize_features);
    get_if(j, "g_lr", cfg.g_opt.lr);
    get_if(j, "d_lr", cfg.d_opt.lr);

    if (j.contains("optimizer")) {
        const std::string kind = j.at("optimizer").get<std::string>();
        if (kind == "sgd") {
            cfg.g_opt.kind = OptimizerConfig::Kind::sgd;
            cfg.d_opt.kind = OptimizerConfig::Kind::sgd;
        } else if (kind == "adam") {
            cfg.g_opt.kind = OptimizerConfig::Kind::adam;
            cfg.d_opt.kind = OptimizerConfig::Kind::adam;
        } else {
            throw std::runtime_error("config: optimizer must be sgd or adam");
        }
    }
    double beta1 = cfg.g_opt.beta1, beta2 = cfg.g_opt.beta2;
    get_if(j, "adam_beta1", beta1);
    get_if(j, "adam_beta2", beta2);
    cfg.g_opt.beta1 = cfg.d_opt.beta1 = beta1;
    cfg.g_opt.beta2 = cfg.d_opt.beta2 = beta2;

    if (j.contains("data")) {
        const std::string data = j.at("data").get<std::string>();
        if (data == "ring") {
            cfg.data.kind = DataSpec::Kind::gaussian_ring;
        } else if (data == "square") {
            cfg.data.kind = DataSpec::Kind::uniform_square;
        } else {
            throw std::runtime_error("config: data must be ring or square");
        }
    }
    get_if(j, "ring_modes", cfg.data.num_modes);
    get_if(j, "ring_radius", cfg.data.radius);
    get_if(j, "ring_sigma", cfg.data.sigma);

    std::string kernel = "vmf";
    get_if(j, "kernel", kernel);
    if (kernel == "vmf") {
        cfg.kernel = KernelSpec::vmf(cfg.weights.tau);
    } else if (kernel == "gaussian") {
        double sigma = 1.0;
        get_if(j, "kernel_sigma", sigma);
        cfg.kernel = KernelSpec::gaussian(sigma);
    } else {
        throw std::runtime_error("config: kernel must be vmf or gaussian");
    }

    cfg.validate();
    return cfg;
}

TrainConfig train_config_from_file(const std::string& path) {
    return train_config_from_json_text(parse_file(path).dump());
}

AppendixAConfig appendix_config_from_json_text(const std::string& text) {
    const json j = json::parse(text);

    static const std::set<std::string> known = {
        "seed",           "n_points",         "mode_a",          "mode_b",
        "mode_sigma",     "square_center",    "square_half_width", "classifier_lr",
        "classifier_tol", "classifier_patience", "classifier_max_steps", "feature_steps",
        "feature_lr",     "kernel_sigma",     "loss",            "leave_one_out"};
    reject_unknown(j, known, "appendix-a");

    AppendixAConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "n_points", cfg.n_points);
    get_if(j, "mode_a", cfg.mode_a);
    get_if(j, "mode_b", cfg.mode_b);
    get_if(j, "mode_sigma", cfg.mode_sigma);
    get_if(j, "square_center", cfg.square_center);
    get_if(j, "square_half_width", cfg.square_half_width);
    get_if(j, "classifier_lr", cfg.classifier_lr);
    get_if(j, "classifier_tol", cfg.classifier_tol);
    get_if(j, "classifier_patience", cfg.classifier_patience);
    get_if(j, "classifier_max_steps", cfg.classifier_max_steps);
    get_if(j, "feature_steps", cfg.feature_steps);
    get_if(j, "feature_lr", cfg.feature_lr);
    get_if(j, "kernel_sigma", cfg.kernel_sigma);
    get_if(j, "leave_one_out", cfg.leave_one_out);

    if (j.contains("loss")) {
        const std::string loss = j.at("loss").get<std::string>();
        if (loss == "hinge") {
            cfg.loss = AppendixAConfig::Loss::hinge;
        } else if (loss == "kdd") {
            cfg.loss = AppendixAConfig::Loss::kdd;
        } else {
            throw std::runtime_error("config: loss must be hinge or kdd");
        }
    }

    cfg.validate();
    return cfg;
}

AppendixAConfig appendix_config_from_file(const std::string& path) {
    return appendix_config_from_json_text(parse_file(path).dump());
}

}  // namespace kdd::config
