#include "kdd/models.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "kdd/numerics.hpp"

namespace kdd {

namespace {

constexpr double kLeakySlope = 0.2;

double activate(Activation a, double z) {
    return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : kLeakySlope * z);
}

double activate_deriv(Activation a, double z) {
    if (a == Activation::tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : kLeakySlope;
}

// out = x * W + b, x: (n x in), W: (in x out)
Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
    Matrix out(x.rows(), w.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < w.cols(); ++j) row[j] = b[j];
        for (std::size_t k = 0; k < x.cols(); ++k) {
            const double xv = x(i, k);
            const auto wrow = w.row(k);
            for (std::size_t j = 0; j < w.cols(); ++j) row[j] += xv * wrow[j];
        }
    }
    return out;
}

}  // namespace

Mlp Mlp::init(std::vector<std::size_t> widths, Activation act, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: needs at least one layer");
    for (std::size_t w : widths)
        if (w == 0) throw std::invalid_argument("Mlp: zero layer width");

    Mlp net;
    net.widths = std::move(widths);
    net.activation = act;
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
        const std::size_t fan_in = net.widths[l];
        const std::size_t fan_out = net.widths[l + 1];
        Matrix w(fan_in, fan_out);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data()) v = scale * rng.normal();
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].size() + biases[l].size();
    return n;
}

Matrix mlp_forward(const Mlp& net, const Matrix& batch, MlpTape* tape) {
    if (batch.cols() != net.input_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");

    if (tape) {
        tape->input = batch;
        tape->pre_acts.clear();
        tape->revision = net.revision;
    }

    Matrix x = batch;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Matrix z = affine(x, net.weights[l], net.biases[l]);
        if (tape) tape->pre_acts.push_back(z);
        const bool last = (l + 1 == net.layer_count());
        if (!last)
            for (double& v : z.data()) v = activate(net.activation, v);
        x = std::move(z);
    }
    if (!x.all_finite()) throw std::runtime_error("mlp_forward: non-finite output");
    return x;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
    if (other.weights.size() != weights.size())
        throw std::invalid_argument("MlpGrads::add_scaled: layer mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t k = 0; k < weights[l].size(); ++k)
            weights[l].data()[k] += scale * other.weights[l].data()[k];
        for (std::size_t k = 0; k < biases[l].size(); ++k)
            biases[l][k] += scale * other.biases[l][k];
    }
}

double MlpGrads::squared_norm() const {
    double s = 0.0;
    for (const Matrix& w : weights)
        for (double v : w.data()) s += v * v;
    for (const Vector& b : biases)
        for (double v : b) s += v * v;
    return s;
}

MlpBackward mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& upstream) {
    if (tape.revision != net.revision)
        throw std::runtime_error("mlp_backward: stale tape (parameters changed since forward)");
    if (tape.pre_acts.size() != net.layer_count())
        throw std::invalid_argument("mlp_backward: tape does not match net");
    if (upstream.rows() != tape.input.rows() || upstream.cols() != net.output_dim())
        throw std::invalid_argument("mlp_backward: upstream shape mismatch");

    MlpBackward out;
    out.grads = MlpGrads::zeros_like(net);

    const std::size_t n = tape.input.rows();
    Matrix delta = upstream;  // gradient w.r.t. the current layer's pre-activation

    for (std::size_t li = net.layer_count(); li-- > 0;) {
        // Input of layer li, with the activation applied for hidden inputs.
        const Matrix& below = (li == 0) ? tape.input : tape.pre_acts[li - 1];
        const bool below_is_hidden = (li != 0);

        Matrix& gw = out.grads.weights[li];
        Vector& gb = out.grads.biases[li];
        const Matrix& w = net.weights[li];

        for (std::size_t i = 0; i < n; ++i) {
            const auto drow = delta.row(i);
            for (std::size_t j = 0; j < w.cols(); ++j) gb[j] += drow[j];
            for (std::size_t k = 0; k < w.rows(); ++k) {
                const double a = below_is_hidden ? activate(net.activation, below(i, k))
                                                 : below(i, k);
                auto gwrow = gw.row(k);
                for (std::size_t j = 0; j < w.cols(); ++j) gwrow[j] += a * drow[j];
            }
        }

        // delta for the layer below: (delta W^T) o act'(z_below)
        Matrix next(n, w.rows());
        for (std::size_t i = 0; i < n; ++i) {
            const auto drow = delta.row(i);
            auto nrow = next.row(i);
            for (std::size_t k = 0; k < w.rows(); ++k) {
                double s = 0.0;
                const auto wrow = w.row(k);
                for (std::size_t j = 0; j < w.cols(); ++j) s += wrow[j] * drow[j];
                nrow[k] = s;
            }
            if (below_is_hidden)
                for (std::size_t k = 0; k < w.rows(); ++k)
                    nrow[k] *= activate_deriv(net.activation, below(i, k));
        }
        delta = std::move(next);
    }

    out.grad_input = std::move(delta);
    return out;
}

// --- feature map ---

FeatureMapResult feature_map_apply(const FeatureMap& fm, const Matrix& batch) {
    FeatureMapResult out;
    out.phi_un = mlp_forward(fm.trunk, batch, &out.tape.trunk);
    out.tape.norms.assign(batch.rows(), 1.0);

    if (fm.normalize_output) {
        out.phi = Matrix(out.phi_un.rows(), out.phi_un.cols());
        for (std::size_t i = 0; i < out.phi_un.rows(); ++i) {
            const auto normed = l2_normalize(out.phi_un.row(i));
            out.tape.norms[i] = normed.input_norm;
            out.phi.set_row(i, normed.unit);
        }
    } else {
        out.phi = out.phi_un;
    }
    out.tape.phi = out.phi;
    return out;
}

MlpBackward feature_map_backward(const FeatureMap& fm, const FeatureMapTape& tape,
                                 const Matrix& upstream_phi, const Matrix* upstream_phi_un) {
    if (!upstream_phi.same_shape(tape.phi))
        throw std::invalid_argument("feature_map_backward: upstream shape mismatch");

    Matrix upstream_un(upstream_phi.rows(), upstream_phi.cols());
    if (fm.normalize_output) {
        for (std::size_t i = 0; i < upstream_phi.rows(); ++i) {
            const auto u = tape.phi.row(i);
            const double radial = dot(upstream_phi.row(i), u);
            auto row = upstream_un.row(i);
            for (std::size_t j = 0; j < u.size(); ++j)
                row[j] = (upstream_phi(i, j) - radial * u[j]) / tape.norms[i];
        }
    } else {
        upstream_un = upstream_phi;
    }
    if (upstream_phi_un) {
        if (!upstream_phi_un->same_shape(upstream_un))
            throw std::invalid_argument("feature_map_backward: phi_un upstream shape mismatch");
        upstream_un += *upstream_phi_un;
    }
    return mlp_backward(fm.trunk, tape.trunk, upstream_un);
}

FeatureMapGrads FeatureMapGrads::zeros_like(const FeatureMap& fm) {
    FeatureMapGrads g;
    g.trunk = MlpGrads::zeros_like(fm.trunk);
    if (fm.score_head) g.score_head.assign(fm.score_head->size(), 0.0);
    if (fm.label_embedding)
        g.label_embedding = Matrix(fm.label_embedding->rows(), fm.label_embedding->cols());
    return g;
}

// --- generator ---

Matrix generator_forward(const Generator& gen, const Matrix& latents,
                         const std::vector<std::size_t>* labels, MlpTape* tape) {
    if (latents.cols() != gen.latent_dim)
        throw std::invalid_argument("generator_forward: latent dimension mismatch");
    if (gen.conditional() != (labels != nullptr))
        throw std::invalid_argument("generator_forward: labels required iff conditional");

    if (!gen.conditional()) return mlp_forward(gen.net, latents, tape);

    if (labels->size() != latents.rows())
        throw std::invalid_argument("generator_forward: label count mismatch");
    Matrix input(latents.rows(), gen.latent_dim + gen.num_classes);
    for (std::size_t i = 0; i < latents.rows(); ++i) {
        for (std::size_t j = 0; j < gen.latent_dim; ++j) input(i, j) = latents(i, j);
        const std::size_t c = (*labels)[i];
        if (c >= gen.num_classes) throw std::invalid_argument("generator_forward: label out of range");
        input(i, gen.latent_dim + c) = 1.0;
    }
    return mlp_forward(gen.net, input, tape);
}

// --- optimizer ---

void OptimizerConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("OptimizerConfig: lr must be > 0");
    if (kind == Kind::adam) {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("OptimizerConfig: betas must be in [0, 1)");
        if (!(eps > 0.0)) throw std::invalid_argument("OptimizerConfig: eps must be > 0");
    }
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("Optimizer::step: block count mismatch");

    std::size_t total = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size())
            throw std::invalid_argument("Optimizer::step: block size mismatch");
        total += params[b].size();
    }

    if (cfg_.kind == OptimizerConfig::Kind::sgd) {
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t i = 0; i < params[b].size(); ++i)
                params[b][i] -= cfg_.lr * grads[b][i];
        return;
    }

    if (m_.empty()) {
        m_.assign(total, 0.0);
        v_.assign(total, 0.0);
        total_ = total;
    } else if (total != total_) {
        throw std::invalid_argument("Optimizer::step: parameter layout changed");
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i, ++k) {
            const double g = grads[b][i];
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m_[k] / bc1;
            const double vhat = v_[k] / bc2;
            params[b][i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

std::vector<std::span<double>> param_views(Mlp& net) {
    std::vector<std::span<double>> v;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        v.emplace_back(net.weights[l].data());
        v.emplace_back(net.biases[l]);
    }
    return v;
}

std::vector<std::span<const double>> grad_views(const MlpGrads& g) {
    std::vector<std::span<const double>> v;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        v.emplace_back(g.weights[l].data());
        v.emplace_back(g.biases[l]);
    }
    return v;
}

std::vector<std::span<double>> param_views(FeatureMap& fm) {
    auto v = param_views(fm.trunk);
    if (fm.score_head) v.emplace_back(*fm.score_head);
    if (fm.label_embedding) v.emplace_back(fm.label_embedding->data());
    return v;
}

std::vector<std::span<const double>> grad_views(const FeatureMapGrads& g) {
    auto v = grad_views(g.trunk);
    if (!g.score_head.empty()) v.emplace_back(g.score_head);
    if (!g.label_embedding.empty()) v.emplace_back(g.label_embedding.data());
    return v;
}

void optimizer_step(Optimizer& opt, Mlp& net, const MlpGrads& grads) {
    opt.step(param_views(net), grad_views(grads));
    net.touch();
}

void optimizer_step(Optimizer& opt, FeatureMap& fm, const FeatureMapGrads& grads) {
    opt.step(param_views(fm), grad_views(grads));
    fm.trunk.touch();
}

// --- checkpoints ---

namespace {

constexpr const char* kCheckpointMagic = "kddckpt";
constexpr int kCheckpointVersion = 1;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_checkpoint(std::ostream& os, const std::vector<NamedArray>& arrays) {
    os << kCheckpointMagic << ' ' << kCheckpointVersion << ' ' << arrays.size() << '\n';
    for (const NamedArray& a : arrays) {
        os << a.name << ' ' << a.shape.size();
        std::size_t expect = 1;
        for (std::size_t d : a.shape) {
            os << ' ' << d;
            expect *= d;
        }
        os << '\n';
        if (expect != a.values.size())
            throw std::invalid_argument("write_checkpoint: shape/value mismatch for " + a.name);
        for (std::size_t i = 0; i < a.values.size(); ++i)
            os << (i ? " " : "") << fmt_double(a.values[i]);
        os << '\n';
    }
    if (!os) throw std::runtime_error("write_checkpoint: stream failure");
}

std::vector<NamedArray> read_checkpoint(std::istream& is) {
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    if (!(is >> magic >> version >> count) || magic != kCheckpointMagic)
        throw std::runtime_error("read_checkpoint: not a kddckpt file");
    if (version != kCheckpointVersion)
        throw std::runtime_error("read_checkpoint: unsupported version");

    std::vector<NamedArray> arrays(count);
    for (NamedArray& a : arrays) {
        std::size_t ndim = 0;
        if (!(is >> a.name >> ndim)) throw std::runtime_error("read_checkpoint: truncated header");
        a.shape.resize(ndim);
        std::size_t total = 1;
        for (std::size_t& d : a.shape) {
            if (!(is >> d)) throw std::runtime_error("read_checkpoint: truncated shape");
            total *= d;
        }
        a.values.resize(total);
        for (double& v : a.values)
            if (!(is >> v)) throw std::runtime_error("read_checkpoint: truncated values");
    }
    return arrays;
}

namespace {

void push_mlp_arrays(const std::string& prefix, const Mlp& net, std::vector<NamedArray>& out) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s.layer%zu.W", prefix.c_str(), l);
        out.push_back({name, {net.weights[l].rows(), net.weights[l].cols()}, net.weights[l].data()});
        std::snprintf(name, sizeof(name), "%s.layer%zu.b", prefix.c_str(), l);
        out.push_back({name, {net.biases[l].size()}, net.biases[l]});
    }
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
    for (const NamedArray& a : arrays)
        if (a.name == name) return a;
    throw std::runtime_error("restore_params: missing array " + name);
}

void load_mlp_arrays(const std::string& prefix, Mlp& net, const std::vector<NamedArray>& arrays) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s.layer%zu.W", prefix.c_str(), l);
        const NamedArray& w = find_array(arrays, name);
        if (w.values.size() != net.weights[l].size())
            throw std::runtime_error("restore_params: shape mismatch for " + std::string(name));
        net.weights[l].data() = w.values;
        std::snprintf(name, sizeof(name), "%s.layer%zu.b", prefix.c_str(), l);
        const NamedArray& b = find_array(arrays, name);
        if (b.values.size() != net.biases[l].size())
            throw std::runtime_error("restore_params: shape mismatch for " + std::string(name));
        net.biases[l] = b.values;
    }
    net.touch();
}

}  // namespace

std::vector<NamedArray> snapshot_params(const Generator& gen, const FeatureMap& fm) {
    std::vector<NamedArray> arrays;
    push_mlp_arrays("g", gen.net, arrays);
    push_mlp_arrays("d.trunk", fm.trunk, arrays);
    if (fm.score_head) arrays.push_back({"d.theta", {fm.score_head->size()}, *fm.score_head});
    if (fm.label_embedding)
        arrays.push_back({"d.embedding",
                          {fm.label_embedding->rows(), fm.label_embedding->cols()},
                          fm.label_embedding->data()});
    return arrays;
}

void restore_params(Generator& gen, FeatureMap& fm, const std::vector<NamedArray>& arrays) {
    load_mlp_arrays("g", gen.net, arrays);
    load_mlp_arrays("d.trunk", fm.trunk, arrays);
    if (fm.score_head) fm.score_head = find_array(arrays, "d.theta").values;
    if (fm.label_embedding) {
        const NamedArray& e = find_array(arrays, "d.embedding");
        if (e.values.size() != fm.label_embedding->size())
            throw std::runtime_error("restore_params: embedding shape mismatch");
        fm.label_embedding->data() = e.values;
    }
}

namespace {

std::uint64_t fnv1a_doubles(std::uint64_t h, std::span<const double> vals) {
    for (double v : vals) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (bits >> (8 * byte)) & 0xFFULL;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

}  // namespace

std::uint64_t param_checksum(const Mlp& net) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        h = fnv1a_doubles(h, net.weights[l].data());
        h = fnv1a_doubles(h, net.biases[l]);
    }
    return h;
}

std::uint64_t param_checksum(const FeatureMap& fm) {
    std::uint64_t h = param_checksum(fm.trunk);
    if (fm.score_head) h = fnv1a_doubles(h, *fm.score_head);
    if (fm.label_embedding) h = fnv1a_doubles(h, fm.label_embedding->data());
    return h;
}

}  // namespace kdd
