#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "macprint/tcn.hpp"
#include "macprint/trace_model.hpp"

using namespace macprint;

namespace {

TcnConfig small(std::uint64_t seed = 1) {
    TcnConfig c;
    c.channels = 8;
    c.kernel = 3;
    c.levels = 2;
    c.dropout = 0.1;
    c.epochs = 15;
    c.batch_size = 16;
    c.learning_rate = 0.01;
    c.seed = seed;
    return c;
}

std::vector<double> random_input(std::mt19937_64 &rng, std::size_t n) {
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> v(n);
    for (auto &x : v) x = nd(rng);
    return v;
}

}  // namespace

TEST_CASE("softmax is a distribution and is shift-invariant") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        auto z = random_input(rng, 1 + rng() % 40);
        for (auto &v : z) v *= 30;
        auto p = softmax(z);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        auto shifted = z;
        for (auto &v : shifted) v += 500;
        auto q = softmax(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-9));
    }
}

TEST_CASE("untrained forty-class model is close to uniform") {
    TcnModel m(small(), 31, 3, 40);
    std::mt19937_64 rng(6);
    std::vector<double> mean(40, 0.0);
    for (int s = 0; s < 1000; ++s) {
        auto p = m.forward(random_input(rng, m.input_size()));
        REQUIRE(p.size() == 40);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
        for (std::size_t i = 0; i < 40; ++i) mean[i] += p[i] / 1000;
    }
    for (double v : mean) CHECK(std::abs(v - 1.0 / 40) <= 0.05);
}

TEST_CASE("initialisation and training are deterministic per seed") {
    TcnModel a(small(3), 9, 2, 3), b(small(3), 9, 2, 3), c(small(4), 9, 2, 3);
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));

    std::mt19937_64 rng(1);
    LabeledSamples data;
    data.input_size = a.input_size();
    for (int i = 0; i < 60; ++i) data.add(random_input(rng, a.input_size()), static_cast<std::size_t>(i % 3));
    auto cfg = small(3);
    cfg.epochs = 2;
    TcnModel x(cfg, 9, 2, 3), y(cfg, 9, 2, 3);
    auto rx = tcn_train(x, data);
    auto ry = tcn_train(y, data);
    CHECK(rx.epoch_loss == ry.epoch_loss);
    CHECK(std::equal(x.parameters().begin(), x.parameters().end(), y.parameters().begin()));
}

TEST_CASE("learns a separable two-class problem") {
    const std::size_t window = 9, in = 2;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0, 0.3);
    auto make = [&](std::size_t label) {
        std::vector<double> v(window * in);
        for (std::size_t t = 0; t < window; ++t) {
            v[t * in] = (label ? 1.0 : -1.0) + noise(rng);
            v[t * in + 1] = noise(rng);
        }
        return v;
    };
    LabeledSamples train, test;
    train.input_size = test.input_size = window * in;
    for (int i = 0; i < 400; ++i) train.add(make(i % 2), static_cast<std::size_t>(i % 2));
    for (int i = 0; i < 400; ++i) test.add(make(i % 2), static_cast<std::size_t>(i % 2));

    TcnModel m(small(), window, in, 2);
    auto report = tcn_train(m, train);
    CHECK(report.epoch_loss.back() < report.initial_loss);
    auto logits = m.activations(test.inputs, test.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        correct += (logits[i * 2 + 1] > logits[i * 2]) == (test.labels[i] == 1);
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.99);
}

TEST_CASE("training rejects a missing class") {
    LabeledSamples data;
    data.input_size = 6;
    for (int i = 0; i < 10; ++i) data.add(std::vector<double>(6, 0.1 * i), 0);
    TcnModel m(small(), 3, 2, 2);
    CHECK_THROWS_AS(tcn_train(m, data), Error);
}

TEST_CASE("analytic gradients match finite differences") {
    std::mt19937_64 rng(31);
    for (bool attention : {true, false}) {
        auto cfg = small();
        cfg.attention = attention;
        TcnModel m(cfg, 11, 3, 5);
        for (int rep = 0; rep < 5; ++rep) {
            auto x = random_input(rng, m.input_size());
            auto gc = gradient_check(m, x, rng() % 5, 150, rng());
            CHECK(gc.all_finite);
            CHECK(gc.checked > 100);
            CHECK(gc.max_relative_error < 1e-4);
        }
    }
}

TEST_CASE("attention head alone has correct gradients") {
    auto cfg = small();
    cfg.levels = 0;
    TcnModel m(cfg, 7, 4, 3);
    std::mt19937_64 rng(8);
    auto gc = gradient_check(m, random_input(rng, m.input_size()), 2, 200, 3);
    CHECK(gc.all_finite);
    CHECK(gc.max_relative_error < 1e-4);
}

TEST_CASE("gradients stay finite on an all-zero input") {
    TcnModel m(small(), 7, 3, 4);
    std::vector<double> zero(m.input_size(), 0.0);
    auto gc = gradient_check(m, zero, 1, 100, 5);
    CHECK(gc.all_finite);
    CHECK(gc.max_relative_error < 1e-4);
    std::vector<double> grad(m.parameter_count());
    std::size_t label = 2;
    double l = m.loss(zero, std::span<const std::size_t>(&label, 1), grad);
    CHECK(std::isfinite(l));
    CHECK(std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); }));
}

TEST_CASE("config validation") {
    auto c = small();
    c.kernel = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small();
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small();
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}
