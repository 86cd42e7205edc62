#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdd/numerics.hpp"
#include "test_support.hpp"

using namespace kdd;

TEST_CASE("rng: identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: distinct seeds diverge") {
    Rng a(42), b(43);
    bool differ = false;
    for (int i = 0; i < 100; ++i)
        if (a.next_u64() != b.next_u64()) differ = true;
    CHECK(differ);
}

TEST_CASE("rng: seed 0 matches the reference splitmix64 stream") {
    // Independent re-statement of the published splitmix64 update.
    std::uint64_t state = 0;
    auto reference = [&state] {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    Rng rng(0);
    bool any_nonzero = false;
    for (int i = 0; i < 10; ++i) {
        const std::uint64_t v = rng.next_u64();
        CHECK(v == reference());
        if (v != 0) any_nonzero = true;
    }
    CHECK(any_nonzero);
    // First draw of the canonical seed-0 stream.
    CHECK(Rng(0).next_u64() == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("rng: uniform draws live in [0, 1)") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("rng: derived streams are independent of parent consumption") {
    Rng a(9);
    const Rng d1 = a.derive(3);
    a.next_u64();
    Rng b(9);
    CHECK(d1.state() == b.derive(3).state());
}

TEST_CASE("sample_gaussian: law of large numbers") {
    Rng rng(1);
    const Matrix m = sample_gaussian(rng, 100000, {0.0, 0.0}, {1.0, 1.0});
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        mx += m(i, 0);
        my += m(i, 1);
    }
    mx /= m.rows();
    my /= m.rows();
    CHECK(std::abs(mx) < 0.02);
    CHECK(std::abs(my) < 0.02);
}

TEST_CASE("sample_gaussian: vanishing spread pins the row to the mean") {
    Rng rng(2);
    const Matrix m = sample_gaussian(rng, 1, {3.0, -1.0}, {1e-12, 1e-12});
    CHECK(m(0, 0) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(m(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("sample_gaussian: empty batch keeps the column count") {
    Rng rng(3);
    const Matrix m = sample_gaussian(rng, 0, {0.0, 0.0}, {1.0, 1.0});
    CHECK(m.rows() == 0);
    CHECK(m.cols() == 2);
}

TEST_CASE("sample_gaussian: non-positive std rejected") {
    Rng rng(4);
    CHECK_THROWS_AS(sample_gaussian(rng, 1, {0.0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(sample_gaussian(rng, 1, {0.0}, {-1.0}), std::invalid_argument);
}

TEST_CASE("sample_uniform_square: support bound") {
    Rng rng(5);
    const Matrix m = sample_uniform_square(rng, 1000, {0.0, 0.0}, 1.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(m(i, j) >= -1.0);
            CHECK(m(i, j) <= 1.0);
        }
}

TEST_CASE("sample_uniform_square: empirical mean near center") {
    Rng rng(6);
    const Matrix m = sample_uniform_square(rng, 100000, {1.0, -2.0}, 1.0);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        mx += m(i, 0);
        my += m(i, 1);
    }
    CHECK(std::abs(mx / m.rows() - 1.0) < 0.02);
    CHECK(std::abs(my / m.rows() + 2.0) < 0.02);
}

TEST_CASE("sample_uniform_square: degenerate half width rejected") {
    Rng rng(7);
    CHECK_THROWS_AS(sample_uniform_square(rng, 1, {0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("sample_unit_direction: unit norm and 1-D sign") {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        const Vector v = sample_unit_direction(rng, 2);
        CHECK(std::abs(norm2(v) - 1.0) <= 1e-12);
    }
    for (int i = 0; i < 20; ++i) {
        const Vector v = sample_unit_direction(rng, 1);
        CHECK((v[0] == 1.0 || v[0] == -1.0));
    }
    CHECK_THROWS_AS(sample_unit_direction(rng, 0), std::invalid_argument);
}

TEST_CASE("sample_unit_direction: spherical symmetry") {
    Rng rng(9);
    Vector mean(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Vector v = sample_unit_direction(rng, 3);
        for (int j = 0; j < 3; ++j) mean[j] += v[j];
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] / n) < 0.02);
}

TEST_CASE("log_sum_exp: plug-in values") {
    CHECK(log_sum_exp(Vector{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Vector{1000.0, 1000.0}) ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Vector{0.0}) == 0.0);
    CHECK_THROWS_AS(log_sum_exp(Vector{}), std::invalid_argument);
    CHECK(std::isfinite(log_sum_exp(Vector{700.0, 700.0, 700.0})));
    CHECK(std::isfinite(log_sum_exp(Vector{-700.0, -700.0})));
}

TEST_CASE("log_sum_exp: shift identity holds exactly") {
    Rng rng(10);
    for (int c = 0; c < 200; ++c) {
        const std::size_t n = 1 + rng.next_below(8);
        Vector v = test::random_vector(rng, n, 5.0);
        const double m = *std::max_element(v.begin(), v.end());
        Vector shifted(v);
        for (double& x : shifted) x -= m;
        CHECK(log_sum_exp(v) == m + log_sum_exp(shifted));
    }
}

TEST_CASE("finite_diff_grad: quadratic is exact to rounding") {
    const auto f = [](const Vector& x) { return x[0] * x[0] + x[1] * x[1]; };
    const Vector g = finite_diff_grad(f, {1.0, 2.0}, 1e-5);
    CHECK(std::abs(g[0] - 2.0) <= 1e-8);
    CHECK(std::abs(g[1] - 4.0) <= 1e-8);
}

TEST_CASE("finite_diff_grad: constant function") {
    const Vector g = finite_diff_grad([](const Vector&) { return 3.5; }, {1.0, -1.0, 0.5}, 1e-5);
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("finite_diff_grad: sine at the origin") {
    const Vector g = finite_diff_grad([](const Vector& x) { return std::sin(x[0]); }, {0.0}, 1e-5);
    CHECK(std::abs(g[0] - 1.0) <= 1e-9);
}

TEST_CASE("finite_diff_grad: invalid step rejected") {
    CHECK_THROWS_AS(finite_diff_grad([](const Vector&) { return 0.0; }, {0.0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("finite_diff_grad: degree-2 polynomials match analytic gradients") {
    Rng rng(11);
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 2 + rng.next_below(4);
        const Vector a = test::random_vector(rng, n);
        const Matrix q = test::random_matrix(rng, n, n);
        const Vector x = test::random_vector(rng, n);

        const auto f = [&](const Vector& v) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                s += a[i] * v[i];
                for (std::size_t j = 0; j < n; ++j) s += 0.5 * q(i, j) * v[i] * v[j];
            }
            return s;
        };
        Vector analytic(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            analytic[i] = a[i];
            for (std::size_t j = 0; j < n; ++j)
                analytic[i] += 0.5 * (q(i, j) + q(j, i)) * x[j];
        }
        CHECK(test::rel_err(analytic, finite_diff_grad(f, x)) <= 1e-8);
    }
}

TEST_CASE("l2_normalize: 3-4-5 triangle") {
    const auto r = l2_normalize(Vector{3.0, 4.0});
    CHECK(r.unit[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.unit[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.input_norm == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("l2_normalize: unit input unchanged, radial upstream killed") {
    Rng rng(12);
    const Vector u = test::random_unit_vector(rng, 4);
    const auto r = l2_normalize(u);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.unit[i] - u[i]) <= 1e-15);
    const Vector g = r.backward(u);  // upstream parallel to u
    for (double v : g) CHECK(std::abs(v) <= 1e-15);
}

TEST_CASE("l2_normalize: backward is orthogonal to the direction") {
    Rng rng(13);
    for (int c = 0; c < 200; ++c) {
        const std::size_t n = 2 + rng.next_below(6);
        const Vector v = test::random_vector(rng, n, 2.0);
        if (norm2(v) <= 1e-6) continue;
        const auto r = l2_normalize(v);
        const Vector g = r.backward(test::random_vector(rng, n));
        CHECK(std::abs(dot(r.unit, g)) <= 1e-12);
    }
}

TEST_CASE("l2_normalize: backward matches finite differences") {
    Rng rng(14);
    for (int c = 0; c < 100; ++c) {
        const std::size_t n = 2 + rng.next_below(5);
        const Vector v = test::random_vector(rng, n, 2.0);
        if (norm2(v) < 0.3) continue;  // keep the FD probe well conditioned
        const Vector upstream = test::random_vector(rng, n);

        const auto r = l2_normalize(v);
        const Vector analytic = r.backward(upstream);
        const Vector fd = finite_diff_grad(
            [&](const Vector& x) { return dot(l2_normalize(x).unit, upstream); }, v);
        CHECK(test::rel_err(analytic, fd) <= 1e-6);
    }
}

TEST_CASE("l2_normalize: degenerate input raises the dedicated error") {
    CHECK_THROWS_AS(l2_normalize(Vector{0.0, 0.0}), degenerate_norm_error);
    CHECK_THROWS_AS(l2_normalize(Vector{1e-13, 0.0}), degenerate_norm_error);
}
