#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "macprint/openmax.hpp"
#include "macprint/trace_model.hpp"

using namespace macprint;

namespace {

std::vector<double> random_simplex(std::mt19937_64 &rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> q(n);
    for (auto &v : q) v = e(rng);
    const double s = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto &v : q) v /= s;
    return q;
}

// three well separated classes in 4-d activation space
void clustered(std::mt19937_64 &rng, std::size_t per_class, std::vector<double> &acts, std::vector<std::size_t> &labels) {
    std::normal_distribution<double> noise(0, 0.3);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t d = 0; d < 4; ++d) acts.push_back((d == c ? 5.0 : 0.0) + noise(rng));
            labels.push_back(c);
        }
    }
}

}  // namespace

TEST_CASE("calibration conserves probability mass") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t h = 2 + rng() % 39;
        auto q = random_simplex(rng, h);
        std::vector<double> c(h);
        for (auto &v : c) v = u(rng);
        auto qh = openmax_calibrate(q, c);
        REQUIRE(qh.size() == h + 1);
        CHECK(std::accumulate(qh.begin(), qh.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : qh) CHECK(v >= 0);
    }
}

TEST_CASE("full confidence keeps softmax and zero confidence is all unknown") {
    std::vector<double> q{0.2, 0.5, 0.3};
    auto keep = openmax_calibrate(q, std::vector<double>{1, 1, 1});
    CHECK(keep[0] == doctest::Approx(0.2));
    CHECK(keep[1] == doctest::Approx(0.5));
    CHECK(keep[3] == doctest::Approx(0.0));
    auto none = openmax_calibrate(q, std::vector<double>{0, 0, 0});
    CHECK(none[3] == doctest::Approx(1.0));
    CHECK(openmax_decide(none, 0.5) == 3);
    CHECK(openmax_decide(keep, 0.5) == 1);
    CHECK_THROWS_AS(openmax_calibrate(q, std::vector<double>{1, 1}), Error);
}

TEST_CASE("unknown threshold is strict") {
    CHECK(openmax_decide(std::vector<double>{0.3, 0.1, 0.6}, 0.5) == 2);
    CHECK(openmax_decide(std::vector<double>{0.3, 0.2, 0.5}, 0.5) == 0);
    CHECK(openmax_decide(std::vector<double>{0.25, 0.25, 0.5}, 0.5) == 0);
}

TEST_CASE("lower confidence never lowers the unknown mass") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 300; ++rep) {
        auto q = random_simplex(rng, 6);
        std::vector<double> c(6);
        for (auto &v : c) v = u(rng);
        auto before = openmax_calibrate(q, c)[6];
        c[rng() % 6] *= u(rng);
        CHECK(openmax_calibrate(q, c)[6] >= before - 1e-15);
    }
}

TEST_CASE("weibull fit recovers known parameters") {
    std::mt19937_64 rng(17);
    std::weibull_distribution<double> wd(2.0, 5.0);
    std::vector<double> x(200);
    for (auto &v : x) v = wd(rng);
    auto w = fit_weibull(x);
    CHECK_FALSE(w.degenerate);
    CHECK(w.shape == doctest::Approx(2.0).epsilon(0.15));
    CHECK(w.scale == doctest::Approx(5.0).epsilon(0.15));
    CHECK(w.cdf(0) == 0);
    CHECK(w.cdf(1e9) == doctest::Approx(1.0));
    CHECK(w.cdf(3) < w.cdf(4));
}

TEST_CASE("weibull fit is scale-equivariant") {
    std::mt19937_64 rng(4);
    std::weibull_distribution<double> wd(1.4, 2.0);
    std::vector<double> x(50);
    for (auto &v : x) v = wd(rng);
    auto a = fit_weibull(x);
    for (double k : {0.01, 3.0, 1000.0}) {
        std::vector<double> y(x);
        for (auto &v : y) v *= k;
        auto b = fit_weibull(y);
        CHECK(b.shape == doctest::Approx(a.shape).epsilon(1e-9));
        CHECK(b.scale == doctest::Approx(a.scale * k).epsilon(1e-9));
    }
}

TEST_CASE("weibull fit edge cases") {
    auto flat = fit_weibull(std::vector<double>{2.0, 2.0, 2.0, 2.0});
    CHECK(flat.degenerate);
    CHECK(flat.scale == doctest::Approx(2.0));
    CHECK(flat.cdf(1.9) < 0.01);
    CHECK(flat.cdf(2.1) > 0.99);
    CHECK_THROWS_AS(fit_weibull(std::vector<double>{1.0, 2.0}), Error);
    CHECK_THROWS_AS(fit_weibull(std::vector<double>{1.0, -2.0, 3.0}), Error);
    CHECK_THROWS_AS(fit_weibull(std::vector<double>{1.0, NAN, 3.0}), Error);
}

TEST_CASE("fitting on clustered activations") {
    std::mt19937_64 rng(9);
    std::vector<double> acts;
    std::vector<std::size_t> labels;
    clustered(rng, 30, acts, labels);
    OpenMaxConfig cfg;
    cfg.tail_size = 20;
    auto om = openmax_fit(acts, labels, 4, 3, cfg);
    CHECK(om.classes() == 3);
    CHECK(om.unknown_index() == 3);
    for (auto t : om.tail_used) CHECK(t == 20);
    CHECK(om.mav[1][1] == doctest::Approx(5.0).epsilon(0.05));

    // a point on a class mean is confidently known, a far point is not
    auto near = om.confidence(std::vector<double>{5, 0, 0, 0});
    auto far = om.confidence(std::vector<double>{0, 0, 0, 40});
    CHECK(near[0] > 0.9);
    for (double c : far) CHECK(c < 0.01);

    // confidence decays with distance from the mean
    double prev = 2;
    for (double r = 0; r < 5; r += 0.25) {
        auto c = om.confidence(std::vector<double>{5 + r, 0, 0, 0})[0];
        CHECK(c <= prev + 1e-12);
        prev = c;
    }

    cfg.tail_size = 200;
    auto shrunk = openmax_fit(acts, labels, 4, 3, cfg);
    for (auto t : shrunk.tail_used) CHECK(t == 30);
}

TEST_CASE("fit rejects classes without enough correct samples") {
    std::mt19937_64 rng(9);
    std::vector<double> acts;
    std::vector<std::size_t> labels;
    clustered(rng, 30, acts, labels);
    // keep only two class-2 rows
    std::vector<double> few(acts.begin(), acts.begin() + 4 * 62);
    std::vector<std::size_t> few_labels(labels.begin(), labels.begin() + 62);
    CHECK_THROWS_AS(openmax_fit(few, few_labels, 4, 3), Error);
    OpenMaxConfig bad;
    bad.tail_size = 2;
    CHECK_THROWS_AS(openmax_fit(acts, labels, 4, 3, bad), Error);
}

TEST_CASE("forty classes calibrate to forty-one entries") {
    std::mt19937_64 rng(40);
    auto q = random_simplex(rng, 40);
    std::vector<double> c(40, 0.7);
    auto qh = openmax_calibrate(q, c);
    CHECK(qh.size() == 41);
    CHECK(qh[40] == doctest::Approx(0.3));
}
