#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kdd/losses.hpp"
#include "kdd/models.hpp"
#include "kdd/numerics.hpp"
#include "test_support.hpp"

using namespace kdd;

namespace {

Vector flatten_params(const Mlp& net) {
    Vector p;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        p.insert(p.end(), net.weights[l].data().begin(), net.weights[l].data().end());
        p.insert(p.end(), net.biases[l].begin(), net.biases[l].end());
    }
    return p;
}

void load_params(Mlp& net, const Vector& p) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (double& x : net.weights[l].data()) x = p[off++];
        for (double& x : net.biases[l]) x = p[off++];
    }
    net.touch();
}

Vector flatten_grads(const MlpGrads& g) {
    Vector v;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        v.insert(v.end(), g.weights[l].data().begin(), g.weights[l].data().end());
        v.insert(v.end(), g.biases[l].begin(), g.biases[l].end());
    }
    return v;
}

}  // namespace

TEST_CASE("mlp: parameter count invariant") {
    Rng rng(1);
    const Mlp net = Mlp::init({2, 64, 64, 2}, Activation::tanh, rng);
    CHECK(net.param_count() == (2 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2);
}

TEST_CASE("mlp_forward: zero weights broadcast the final bias") {
    Rng rng(2);
    Mlp net = Mlp::init({3, 4, 2}, Activation::tanh, rng);
    for (Matrix& w : net.weights)
        for (double& v : w.data()) v = 0.0;
    net.biases[1] = {0.5, -1.5};
    net.touch();

    const Matrix out = mlp_forward(net, test::random_matrix(rng, 5, 3));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(out(i, 0) == 0.5);
        CHECK(out(i, 1) == -1.5);
    }
}

TEST_CASE("mlp_forward: identity single layer") {
    Rng rng(3);
    Mlp net = Mlp::init({2, 2}, Activation::tanh, rng);
    net.weights[0] = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    net.biases[0] = {0.0, 0.0};
    net.touch();

    const Matrix batch = test::random_matrix(rng, 4, 2);
    const Matrix out = mlp_forward(net, batch);
    for (std::size_t k = 0; k < batch.size(); ++k) CHECK(out.data()[k] == batch.data()[k]);
}

TEST_CASE("mlp_forward: bit-identical repeat") {
    Rng rng(4);
    const Mlp net = Mlp::init({2, 8, 3}, Activation::leaky_relu, rng);
    const Matrix batch = test::random_matrix(rng, 6, 2);
    const Matrix a = mlp_forward(net, batch);
    const Matrix b = mlp_forward(net, batch);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.data()[k] == b.data()[k]);
}

TEST_CASE("mlp_backward: zero upstream gives zero gradients") {
    Rng rng(5);
    const Mlp net = Mlp::init({2, 5, 2}, Activation::tanh, rng);
    MlpTape tape;
    mlp_forward(net, test::random_matrix(rng, 3, 2), &tape);
    const MlpBackward b = mlp_backward(net, tape, Matrix(3, 2));
    for (double v : flatten_grads(b.grads)) CHECK(v == 0.0);
    for (double v : b.grad_input.data()) CHECK(v == 0.0);
}

TEST_CASE("mlp_backward: single linear layer closed form") {
    Rng rng(6);
    const Mlp net = Mlp::init({3, 2}, Activation::tanh, rng);
    const Matrix x = test::random_matrix(rng, 4, 3);
    MlpTape tape;
    mlp_forward(net, x, &tape);
    const Matrix upstream = test::random_matrix(rng, 4, 2);
    const MlpBackward b = mlp_backward(net, tape, upstream);

    // grad_W[k][j] = sum_i x(i,k) upstream(i,j); grad_b[j] = sum_i upstream(i,j)
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 2; ++j) {
            double expect = 0.0;
            for (std::size_t i = 0; i < 4; ++i) expect += x(i, k) * upstream(i, j);
            CHECK(b.grads.weights[0](k, j) == doctest::Approx(expect).epsilon(1e-14));
        }
    for (std::size_t j = 0; j < 2; ++j) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 4; ++i) expect += upstream(i, j);
        CHECK(b.grads.biases[0][j] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("mlp_backward: parameter gradients match central differences") {
    Rng rng(7);
    for (int c = 0; c < 10; ++c) {
        const Activation act = c % 2 == 0 ? Activation::tanh : Activation::leaky_relu;
        Mlp net = Mlp::init({2, 6, 1}, act, rng);
        const Matrix batch = test::random_matrix(rng, 5, 2);

        MlpTape tape;
        mlp_forward(net, batch, &tape);
        const MlpBackward b = mlp_backward(net, tape, Matrix(5, 1, 1.0));

        const Vector fd = finite_diff_grad(
            [&](const Vector& p) {
                Mlp probe = net;
                load_params(probe, p);
                const Matrix out = mlp_forward(probe, batch);
                double s = 0.0;
                for (double v : out.data()) s += v;
                return s;
            },
            flatten_params(net));
        CHECK(test::rel_err(flatten_grads(b.grads), fd) <= 1e-5);
    }
}

TEST_CASE("mlp_backward: stale tape rejected after a parameter update") {
    Rng rng(8);
    Mlp net = Mlp::init({2, 4, 2}, Activation::tanh, rng);
    MlpTape tape;
    mlp_forward(net, test::random_matrix(rng, 3, 2), &tape);

    Optimizer opt({OptimizerConfig::Kind::sgd, 0.1});
    optimizer_step(opt, net, MlpGrads::zeros_like(net));

    CHECK_THROWS_AS(mlp_backward(net, tape, Matrix(3, 2)), std::runtime_error);
}

TEST_CASE("feature_map_apply: normalization on and off") {
    Rng rng(9);
    FeatureMap fm;
    fm.trunk = Mlp::init({2, 8, 3}, Activation::leaky_relu, rng);
    const Matrix batch = test::random_matrix(rng, 6, 2);

    fm.normalize_output = true;
    const FeatureMapResult on = feature_map_apply(fm, batch);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(norm2(on.phi.row(i)) - 1.0) <= 1e-9);

    fm.normalize_output = false;
    const FeatureMapResult off = feature_map_apply(fm, batch);
    for (std::size_t k = 0; k < off.phi.size(); ++k)
        CHECK(off.phi.data()[k] == off.phi_un.data()[k]);
}

TEST_CASE("feature_map_backward: input gradients through normalization match FD") {
    Rng rng(10);
    FeatureMap fm;
    fm.trunk = Mlp::init({2, 6, 3}, Activation::tanh, rng);
    fm.normalize_output = true;
    const Matrix batch = test::random_matrix(rng, 4, 2);
    const Matrix upstream = test::random_matrix(rng, 4, 3);

    const FeatureMapResult r = feature_map_apply(fm, batch);
    const MlpBackward b = feature_map_backward(fm, r.tape, upstream);

    const Vector fd = finite_diff_grad(
        [&](const Vector& flat) {
            Matrix probe(4, 2);
            probe.data() = flat;
            const FeatureMapResult pr = feature_map_apply(fm, probe);
            double s = 0.0;
            for (std::size_t k = 0; k < pr.phi.size(); ++k)
                s += pr.phi.data()[k] * upstream.data()[k];
            return s;
        },
        batch.data());
    CHECK(test::rel_err(b.grad_input.data(), fd) <= 1e-5);
}

TEST_CASE("generator_forward: conditional input wiring") {
    Rng rng(11);
    Generator gen;
    gen.latent_dim = 2;
    gen.num_classes = 3;
    gen.net = Mlp::init({5, 4, 2}, Activation::tanh, rng);

    const Matrix z = test::random_matrix(rng, 2, 2);
    const std::vector<std::size_t> labels = {2, 0};
    CHECK_NOTHROW(generator_forward(gen, z, &labels));
    CHECK_THROWS_AS(generator_forward(gen, z, nullptr), std::invalid_argument);

    const std::vector<std::size_t> bad = {3, 0};
    CHECK_THROWS_AS(generator_forward(gen, z, &bad), std::invalid_argument);
}

TEST_CASE("optimizer: sgd step with the reference learning rate") {
    // lr = 10 with gradient (1, 0) moves the first coordinate down by 10.
    Vector p = {3.0, -1.0};
    const Vector g = {1.0, 0.0};
    Optimizer opt({OptimizerConfig::Kind::sgd, 10.0});
    opt.step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(p[0] == -7.0);
    CHECK(p[1] == -1.0);
}

TEST_CASE("optimizer: zero gradient leaves parameters unchanged") {
    Vector p = {1.0, 2.0};
    const Vector g = {0.0, 0.0};
    Optimizer sgd({OptimizerConfig::Kind::sgd, 0.5});
    sgd.step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);

    Optimizer adam({OptimizerConfig::Kind::adam, 0.5});
    adam.step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);
}

TEST_CASE("optimizer: adam single-step magnitude bound") {
    Rng rng(12);
    for (int c = 0; c < 20; ++c) {
        Vector p = test::random_vector(rng, 4);
        const Vector before = p;
        const Vector g = test::random_vector(rng, 4, 10.0);
        const double lr = 0.01;
        Optimizer adam({OptimizerConfig::Kind::adam, lr, 0.9, 0.999, 1e-8});
        adam.step({std::span<double>(p)}, {std::span<const double>(g)});
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::abs(p[i] - before[i]) <= lr * (1.0 + 1e-6));
    }
}

TEST_CASE("optimizer: invalid configs rejected") {
    CHECK_THROWS_AS(Optimizer({OptimizerConfig::Kind::sgd, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Optimizer({OptimizerConfig::Kind::adam, 0.1, 1.0, 0.999, 1e-8}),
                    std::invalid_argument);
}

TEST_CASE("end-to-end: generator through feature map into each loss matches FD") {
    // Nets kept under 200 parameters so central differences stay cheap.
    Rng rng(13);
    Generator gen;
    gen.latent_dim = 2;
    gen.net = Mlp::init({2, 6, 2}, Activation::tanh, rng);  // 38 params

    FeatureMap fm;
    fm.trunk = Mlp::init({2, 6, 2}, Activation::leaky_relu, rng);  // 38 params
    fm.normalize_output = true;
    fm.score_head = test::random_vector(rng, 2);

    const Matrix z = test::random_matrix(rng, 4, 2);
    const Matrix real_x = test::random_matrix(rng, 4, 2);
    const KernelSpec kernel = KernelSpec::vmf(1.0);

    enum class Mode { hinge_g, kdd_g, kdd_d };
    for (const Mode mode : {Mode::hinge_g, Mode::kdd_g, Mode::kdd_d}) {
        // Forward + analytic gradient for the generator parameters.
        const auto loss_of = [&](const Mlp& gnet, const Mlp& dnet) {
            Generator g2 = gen;
            g2.net = gnet;
            FeatureMap f2 = fm;
            f2.trunk = dnet;
            const Matrix x_g = generator_forward(g2, z);
            const FeatureMapResult fg = feature_map_apply(f2, x_g);
            const FeatureMapResult fr = feature_map_apply(f2, real_x);
            switch (mode) {
                case Mode::hinge_g: {
                    Vector s(4);
                    for (int i = 0; i < 4; ++i) s[i] = dot(*f2.score_head, fg.phi.row(i));
                    return hinge_g_loss(s).value;
                }
                case Mode::kdd_g:
                    return kdd_g_loss(fg.phi,
                                      AnchorSet::from_matrix(fr.phi, AnchorSet::Origin::real),
                                      AnchorSet::from_matrix(fg.phi, AnchorSet::Origin::generated),
                                      kernel, true)
                        .value;
                case Mode::kdd_d:
                    return kdd_d_loss(fr.phi, fg.phi, kernel, true).value;
            }
            return 0.0;
        };

        // Analytic: same composition, differentiated by hand.
        MlpTape g_tape;
        const Matrix x_g = generator_forward(gen, z, nullptr, &g_tape);
        const FeatureMapResult fg = feature_map_apply(fm, x_g);
        const FeatureMapResult fr = feature_map_apply(fm, real_x);

        Matrix up_g(4, 2), up_r(4, 2);
        if (mode == Mode::hinge_g) {
            Vector s(4);
            for (int i = 0; i < 4; ++i) s[i] = dot(*fm.score_head, fg.phi.row(i));
            const HingeGLoss h = hinge_g_loss(s);
            for (int i = 0; i < 4; ++i)
                axpy(h.grad_fake[i], *fm.score_head, up_g.row(i));
        } else if (mode == Mode::kdd_g) {
            const LossResult r =
                kdd_g_loss(fg.phi, AnchorSet::from_matrix(fr.phi, AnchorSet::Origin::real),
                           AnchorSet::from_matrix(fg.phi, AnchorSet::Origin::generated), kernel,
                           true);
            up_g = r.grad_gen_features;
        } else {
            const LossResult r = kdd_d_loss(fr.phi, fg.phi, kernel, true);
            up_g = r.grad_gen_features;
            up_r = r.grad_real_features;
        }

        const MlpBackward fg_b = feature_map_backward(fm, fg.tape, up_g);
        const MlpBackward g_b = mlp_backward(gen.net, g_tape, fg_b.grad_input);

        const Vector fd_g = finite_diff_grad(
            [&](const Vector& p) {
                Mlp probe = gen.net;
                load_params(probe, p);
                return loss_of(probe, fm.trunk);
            },
            flatten_params(gen.net));
        CHECK(test::rel_err(flatten_grads(g_b.grads), fd_g) <= 1e-4);

        // Discriminator parameters (feature-map trunk) for the D-style loss.
        if (mode == Mode::kdd_d) {
            MlpGrads trunk_grads = feature_map_backward(fm, fr.tape, up_r).grads;
            trunk_grads.add_scaled(fg_b.grads, 1.0);
            const Vector fd_d = finite_diff_grad(
                [&](const Vector& p) {
                    Mlp probe = fm.trunk;
                    load_params(probe, p);
                    return loss_of(gen.net, probe);
                },
                flatten_params(fm.trunk));
            CHECK(test::rel_err(flatten_grads(trunk_grads), fd_d) <= 1e-4);
        }
    }
}

TEST_CASE("init: identical seeds give bit-identical parameters") {
    Rng a(21), b(21);
    const Mlp n1 = Mlp::init({2, 16, 2}, Activation::tanh, a);
    const Mlp n2 = Mlp::init({2, 16, 2}, Activation::tanh, b);
    CHECK(param_checksum(n1) == param_checksum(n2));
}

TEST_CASE("checkpoint: exact round trip") {
    Rng rng(22);
    Generator gen;
    gen.latent_dim = 2;
    gen.net = Mlp::init({2, 5, 2}, Activation::tanh, rng);
    FeatureMap fm;
    fm.trunk = Mlp::init({2, 5, 3}, Activation::leaky_relu, rng);
    fm.score_head = test::random_vector(rng, 3);
    fm.label_embedding = test::random_matrix(rng, 4, 3);

    std::stringstream ss;
    write_checkpoint(ss, snapshot_params(gen, fm));

    Generator gen2 = gen;
    FeatureMap fm2 = fm;
    Rng scramble(99);
    gen2.net = Mlp::init({2, 5, 2}, Activation::tanh, scramble);
    fm2.trunk = Mlp::init({2, 5, 3}, Activation::leaky_relu, scramble);
    restore_params(gen2, fm2, read_checkpoint(ss));

    CHECK(param_checksum(gen.net) == param_checksum(gen2.net));
    CHECK(param_checksum(fm) == param_checksum(fm2));
}

TEST_CASE("checkpoint: bad header rejected") {
    std::stringstream ss("not_a_checkpoint 1 0\n");
    CHECK_THROWS_AS(read_checkpoint(ss), std::runtime_error);
}

TEST_CASE("scale equivariance: normalization keeps equal-norm score order") {
    // With all |phi_un| equal, dividing by the norm rescales every score by
    // the same positive factor, so signs and the argmax are unchanged.
    Rng rng(23);
    const Vector theta = test::random_vector(rng, 3);
    Matrix phi_un(5, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        Vector row = test::random_unit_vector(rng, 3);
        for (double& v : row) v *= 2.5;  // equal norms
        phi_un.set_row(i, row);
    }

    std::size_t argmax_un = 0, argmax_n = 0;
    double best_un = -1e300, best_n = -1e300;
    for (std::size_t i = 0; i < 5; ++i) {
        const double su = dot(theta, phi_un.row(i));
        const auto normed = l2_normalize(phi_un.row(i));
        const double sn = dot(theta, normed.unit);
        CHECK((su > 0) == (sn > 0));
        if (su > best_un) {
            best_un = su;
            argmax_un = i;
        }
        if (sn > best_n) {
            best_n = sn;
            argmax_n = i;
        }
    }
    CHECK(argmax_un == argmax_n);
}
