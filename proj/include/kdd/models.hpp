#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "kdd/matrix.hpp"
#include "kdd/rng.hpp"

namespace kdd {

enum class Activation { tanh, leaky_relu };  // leaky slope fixed at 0.2

// Plain fully connected net with manual reverse mode. Weights are
// (in x out) so a batch (n x in) maps to (n x out) row by row; the
// activation is applied after every layer except the last.
struct Mlp {
    std::vector<std::size_t> widths;  // e.g. {2, 64, 64, 2}
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Activation activation = Activation::tanh;
    std::uint64_t revision = 0;  // bumped on every parameter mutation

    // Weights ~ N(0, 1/fan_in), biases 0, drawn from rng in layer order.
    static Mlp init(std::vector<std::size_t> widths, Activation act, Rng& rng);

    std::size_t input_dim() const { return widths.front(); }
    std::size_t output_dim() const { return widths.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t param_count() const;

    // Mark parameters as mutated, invalidating outstanding tapes.
    void touch() { ++revision; }
};

// Activation cache from one forward pass; valid for backward only while the
// net's parameters are untouched.
struct MlpTape {
    Matrix input;
    std::vector<Matrix> pre_acts;
    std::uint64_t revision = 0;
};

Matrix mlp_forward(const Mlp& net, const Matrix& batch, MlpTape* tape = nullptr);

struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static MlpGrads zeros_like(const Mlp& net);
    void add_scaled(const MlpGrads& other, double scale);
    double squared_norm() const;
};

struct MlpBackward {
    MlpGrads grads;
    Matrix grad_input;
};

MlpBackward mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& upstream);

// --- discriminator-side feature map ---

// phi_un = trunk(x); phi = phi_un / |phi_un| when normalize_output is set.
// score_head theta gives the hinge score <theta, phi>; label_embedding V is
// the projection-conditioning matrix.
struct FeatureMap {
    Mlp trunk;
    bool normalize_output = true;
    std::optional<Vector> score_head;
    std::optional<Matrix> label_embedding;

    std::size_t feature_dim() const { return trunk.output_dim(); }
};

struct FeatureMapTape {
    MlpTape trunk;
    Matrix phi;      // normalized rows (or phi_un copy when normalization off)
    Vector norms;    // per-row |phi_un|
};

struct FeatureMapResult {
    Matrix phi;
    Matrix phi_un;
    FeatureMapTape tape;
};

FeatureMapResult feature_map_apply(const FeatureMap& fm, const Matrix& batch);

// Pulls an upstream gradient on phi (and optionally an extra one on phi_un)
// back to trunk parameters and the input batch.
MlpBackward feature_map_backward(const FeatureMap& fm, const FeatureMapTape& tape,
                                 const Matrix& upstream_phi,
                                 const Matrix* upstream_phi_un = nullptr);

struct FeatureMapGrads {
    MlpGrads trunk;
    Vector score_head;      // empty when absent
    Matrix label_embedding;

    static FeatureMapGrads zeros_like(const FeatureMap& fm);
};

// --- generator ---

struct Generator {
    Mlp net;
    std::size_t latent_dim = 2;
    std::size_t num_classes = 0;  // > 0: one-hot label concatenated to z

    bool conditional() const { return num_classes > 0; }
};

// Builds the net input (z, or z|onehot) and runs the forward pass. labels is
// required iff the generator is conditional.
Matrix generator_forward(const Generator& gen, const Matrix& latents,
                         const std::vector<std::size_t>* labels = nullptr,
                         MlpTape* tape = nullptr);

// --- optimizers ---

struct OptimizerConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::sgd;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// Owns the moment state; the parameter layout is fixed by the first step and
// checked on every later one.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads);

    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::vector<double> m_, v_;
    long t_ = 0;
    std::size_t total_ = 0;
};

std::vector<std::span<double>> param_views(Mlp& net);
std::vector<std::span<const double>> grad_views(const MlpGrads& g);
std::vector<std::span<double>> param_views(FeatureMap& fm);
std::vector<std::span<const double>> grad_views(const FeatureMapGrads& g);

// Convenience wrappers that also bump the model revision.
void optimizer_step(Optimizer& opt, Mlp& net, const MlpGrads& grads);
void optimizer_step(Optimizer& opt, FeatureMap& fm, const FeatureMapGrads& grads);

// --- checkpoints ---

// Versioned textual checkpoint: named arrays with shapes, values printed with
// %.17g so doubles round-trip exactly. See README for the format.
struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

void write_checkpoint(std::ostream& os, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(std::istream& is);

std::vector<NamedArray> snapshot_params(const Generator& gen, const FeatureMap& fm);
void restore_params(Generator& gen, FeatureMap& fm, const std::vector<NamedArray>& arrays);

// FNV-1a over the raw bit patterns of all parameters; equal checksums across
// runs mean bit-identical parameters.
std::uint64_t param_checksum(const Mlp& net);
std::uint64_t param_checksum(const FeatureMap& fm);

}  // namespace kdd
