// Copyright 2026 The noisykd Authors
// SPDX-License-Identifier: Apache-2.0

#include "noisykd/error.hpp"
#include "noisykd/losses.hpp"
#include "noisykd/mlp.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace nkd;

namespace {

// Flattened parameter access in layer order: weights, then bias.
std::vector<double*> params(Mlp& m) {
    std::vector<double*> out;
    for (auto& l : m.layers()) {
        for (double& w : l.weights) out.push_back(&w);
        for (double& b : l.bias) out.push_back(&b);
    }
    return out;
}

std::vector<double> flat_grads(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t k = 0; k < g.weights.size(); ++k) {
        out.insert(out.end(), g.weights[k].begin(), g.weights[k].end());
        out.insert(out.end(), g.bias[k].begin(), g.bias[k].end());
    }
    return out;
}

} // namespace

TEST_CASE("constructor validates dimensions") {
    CHECK_THROWS_AS(Mlp({4}), InvalidConfig);
    CHECK_THROWS_AS(Mlp({4, 0, 2}), InvalidConfig);
    const Mlp m({3, 5, 2});
    CHECK(m.parameter_count() == 3 * 5 + 5 + 5 * 2 + 2);
    CHECK(teacher_dims(8, 2, 64) == std::vector<std::size_t>{8, 64, 64, 2});
    CHECK(student_dims(8, 2, 64) == std::vector<std::size_t>{8, 32, 2});
}

TEST_CASE("init is seeded and bounded") {
    const auto a = init_model({6, 10, 3}, 42);
    const auto b = init_model({6, 10, 3}, 42);
    const auto c = init_model({6, 10, 3}, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(fingerprint(a) == fingerprint(b));
    CHECK(fingerprint(a) != fingerprint(c));
    for (const auto& l : a.layers()) {
        const double bound = 1.0 / std::sqrt(double(l.in));
        for (double w : l.weights) CHECK(std::abs(w) <= bound);
        for (double v : l.bias) CHECK(v == 0.0);
    }
}

TEST_CASE("forward computes the hand-worked network") {
    Mlp m({2, 2, 2});
    auto& h = m.layers()[0];
    h.weights = {1.0, 0.0, 0.0, -1.0};
    h.bias = {0.0, 0.5};
    auto& o = m.layers()[1];
    o.weights = {1.0, 1.0, 2.0, 0.0};
    o.bias = {0.0, -1.0};
    const std::vector<double> x{0.5, 0.25};
    const double h0 = std::tanh(0.5), h1 = std::tanh(-0.25 + 0.5);
    const auto z = m.forward(x);
    CHECK(z[0] == doctest::Approx(h0 + h1).epsilon(1e-14));
    CHECK(z[1] == doctest::Approx(2 * h0 - 1).epsilon(1e-14));
    CHECK(m.predict(x) == (h0 + h1 > 2 * h0 - 1 ? 0u : 1u));

    Mlp r({2, 2, 2}, Activation::Relu);
    r.layers() = m.layers();
    const auto zr = r.forward(x);
    CHECK(zr[0] == doctest::Approx(0.5 + 0.25));
    CHECK(zr[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(m.forward(std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("predict breaks ties toward the lowest index") {
    Mlp m({1, 3});
    m.layers()[0].weights = {0.0, 0.0, 0.0};
    m.layers()[0].bias = {1.0, 1.0, 0.0};
    CHECK(m.predict(std::vector<double>{3.0}) == 0);
}

TEST_CASE("backprop matches finite differences on whole models") {
    Rng rng(77);
    for (int k = 0; k < 20; ++k) {
        const Activation act = k % 2 ? Activation::Relu : Activation::Tanh;
        const std::vector<std::size_t> dims = k % 3 ? std::vector<std::size_t>{4, 6, 5, 3}
                                                    : std::vector<std::size_t>{5, 4, 2};
        Mlp m = init_model(dims, 100 + k, act);
        const auto x = test::random_vector(rng, dims.front(), 1.5);
        const auto other = test::random_vector(rng, dims.back(), 2.0);
        const std::size_t y = k % dims.back();
        const DistillOptions opt{0.4, 1.0};

        ForwardTrace tr;
        forward_traced(m, x, tr);
        const auto lg = student_loss_grad(y, other, tr.logits(), opt);
        Gradients g(m);
        accumulate_gradients(m, tr, lg.grad, g);
        const auto analytic = flat_grads(g);

        auto ps = params(m);
        std::vector<double> numeric(ps.size());
        const double h = 1e-5;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const double keep = *ps[i];
            *ps[i] = keep + h;
            const double up = student_loss(y, other, m.forward(x), opt);
            *ps[i] = keep - h;
            const double down = student_loss(y, other, m.forward(x), opt);
            *ps[i] = keep;
            numeric[i] = (up - down) / (2 * h);
        }
        CHECK(test::relative_error(analytic, numeric) < 1e-3);
    }
}

TEST_CASE("sgd step applies the mean gradient") {
    Mlp m({1, 2});
    m.layers()[0].weights = {0.5, -0.5};
    m.layers()[0].bias = {0.0, 0.0};
    const std::vector<double> x1{1.0}, x2{-2.0};
    const std::vector<std::span<const double>> xs{x1, x2};
    // Logit gradients picked by hand: dz for sample 1 and sample 2.
    const std::vector<std::vector<double>> dz{{1.0, -1.0}, {0.5, 0.5}};
    OptimizerState opt{0.1, 0};
    backward_and_step(m, xs, dz, opt);
    // dW row0 = (1*1 + 0.5*-2)/2 = 0, row1 = (-1*1 + 0.5*-2)/2 = -1
    // db = ((1 + 0.5)/2, (-1 + 0.5)/2) = (0.75, -0.25)
    CHECK(m.layers()[0].weights[0] == doctest::Approx(0.5));
    CHECK(m.layers()[0].weights[1] == doctest::Approx(-0.5 + 0.1));
    CHECK(m.layers()[0].bias[0] == doctest::Approx(-0.075));
    CHECK(m.layers()[0].bias[1] == doctest::Approx(0.025));
    CHECK(opt.step_count == 1);
}

TEST_CASE("sgd step rejects non-finite gradients") {
    Mlp m = init_model({2, 3, 2}, 1);
    const Mlp before = m;
    const std::vector<double> x{1.0, 1.0};
    const std::vector<std::span<const double>> xs{x};
    const std::vector<std::vector<double>> dz{{NAN, 0.0}};
    OptimizerState opt;
    CHECK_THROWS_AS(backward_and_step(m, xs, dz, opt), TrainingDivergence);
    CHECK(m == before);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const Activation act = seed % 2 ? Activation::Tanh : Activation::Relu;
        const Mlp m = init_model({3 + seed % 4, 7, 2 + seed % 3}, seed, act);
        std::stringstream ss;
        save_model(m, ss);
        const Mlp back = load_model(ss);
        CHECK(back == m);
        CHECK(fingerprint(back) == fingerprint(m));
        Rng rng(seed);
        const auto x = test::random_vector(rng, m.input_dim(), 2.0);
        CHECK(back.forward(x) == m.forward(x));
    }

    const auto path = std::filesystem::temp_directory_path() / "nkd_model_roundtrip.txt";
    const Mlp m = init_model({4, 8, 3}, 9);
    save_model(m, path);
    CHECK(load_model(path) == m);
    std::filesystem::remove(path);

    std::stringstream bad("not-a-model 1\n");
    CHECK_THROWS_AS(load_model(bad), ParseError);
    CHECK_THROWS_AS(load_model(std::filesystem::path("/nonexistent/model.txt")), IoError);
}

TEST_CASE("activation names") {
    CHECK(activation_from_string("tanh") == Activation::Tanh);
    CHECK(activation_from_string("relu") == Activation::Relu);
    CHECK(to_string(Activation::Relu) == "relu");
    CHECK_THROWS_AS(activation_from_string("gelu"), InvalidConfig);
}
