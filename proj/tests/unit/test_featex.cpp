#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "macprint/featex.hpp"
#include "oracles.hpp"

using namespace macprint;
using testing::down;
using testing::up;

namespace {

std::vector<FrameMeta> random_burst(std::mt19937_64 &rng, double start, std::size_t n) {
    std::vector<FrameMeta> out;
    std::uniform_int_distribution<int> slot(0, 1023);
    std::vector<double> ts;
    for (std::size_t i = 0; i < n; ++i) ts.push_back(start + (slot(rng) + 0.5) / 1024.0);
    std::sort(ts.begin(), ts.end());
    for (double t : ts) {
        auto sz = static_cast<std::uint32_t>(1 + rng() % 1500);
        out.push_back(rng() % 3 ? up(t, sz) : down(t, sz));
    }
    return out;
}

}  // namespace

TEST_CASE("window widths round up to odd") {
    CHECK(effective_window(30) == 31);
    CHECK(effective_window(31) == 31);
    CHECK(effective_window(1) == 3);
}

TEST_CASE("burst statistics on a hand-worked burst") {
    std::vector<FrameMeta> fr{up(0.05, 100), up(0.15, 200), down(0.55, 1000), down(0.95, 1400)};
    auto bf = burst_features(fr, 0.0);
    CHECK(bf[0] == 4);
    CHECK(bf[1] == doctest::Approx(675));
    CHECK(bf[2] == doctest::Approx(0.3));
    CHECK(bf[3] == doctest::Approx(0.5));
    CHECK(bf[4] == doctest::Approx(0.0672 / 0.0576 - 3));
    CHECK(bf[5] == doctest::Approx(0.048 / std::pow(0.24, 1.5)));
    CHECK(bf[6] == doctest::Approx(150));
    CHECK(bf[7] == 0);
    CHECK(bf[8] == doctest::Approx(100));
    CHECK(bf[9] == doctest::Approx(200));
    CHECK(bf[13] == doctest::Approx(0.1));
    CHECK(bf[14] == doctest::Approx(1200));
    CHECK(bf[16] == doctest::Approx(1000));
    CHECK(bf[17] == doctest::Approx(1400));
    CHECK(bf[21] == doctest::Approx(0.4));

    auto empty = burst_features({}, 3.0);
    for (double v : empty.p) CHECK(v == 0);
}

TEST_CASE("burst statistics match a naive restatement") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 300; ++rep) {
        const double start = static_cast<double>(rng() % 500);
        auto fr = random_burst(rng, start, 1 + rng() % 60);
        auto got = burst_features(fr, start);
        auto want = oracle::burst_features(fr, start);
        for (std::size_t i = 0; i < burst_feature_count; ++i) {
            CHECK_MESSAGE(got[i] == doctest::Approx(want[i]).epsilon(1e-9), "feature " << i);
        }
    }
}

TEST_CASE("downlink-only burst has zero uplink share and flat uplink block") {
    std::vector<FrameMeta> fr{down(0.1, 500), down(0.2, 600), down(0.7, 700)};
    auto bf = burst_features(fr, 0.0);
    CHECK(bf[3] == 0);
    for (std::size_t i = 6; i <= 13; ++i) CHECK(bf[i] == 0);
    CHECK(bf[14] == doctest::Approx(600));
}

TEST_CASE("burst statistics are invariant to a common time shift") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        auto fr = random_burst(rng, 0.0, 2 + rng() % 40);
        auto shifted = fr;
        for (auto &f : shifted) f.t += 256.0;
        auto a = burst_features(fr, 0.0);
        auto b = burst_features(shifted, 256.0);
        for (std::size_t i = 0; i < burst_feature_count; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
    }
}

TEST_CASE("bursts partition the trace") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<FrameMeta> fr;
        double t = 3.3;
        const int n = 50 + static_cast<int>(rng() % 400);
        for (int i = 0; i < n; ++i) {
            t += std::uniform_real_distribution<double>(0, 0.12)(rng);
            auto sz = static_cast<std::uint32_t>(1 + rng() % 1500);
            fr.push_back(i % 3 ? down(t, sz) : up(t, sz));
        }
        TrafficTrace tr(testing::phone, fr);
        auto feats = trace_burst_features(tr);
        CHECK(feats.size() == burst_count(tr));
        double frames = 0, ups = 0, bytes = 0;
        for (const auto &b : feats) {
            frames += b[0];
            ups += b[0] * b[3];
            bytes += b[0] * b[1];
        }
        double want_bytes = 0;
        for (const auto &f : fr) want_bytes += f.size;
        CHECK(frames == doctest::Approx(static_cast<double>(n)));
        CHECK(ups == doctest::Approx(std::ceil(n / 3.0)));
        CHECK(bytes == doctest::Approx(want_bytes));

        auto bursts = burstify(tr);
        for (std::size_t b = 0; b < bursts.size(); ++b) {
            if (bursts[b].size() < 2) continue;
            auto span = tr.frames().subspan(bursts[b].first, bursts[b].size());
            CHECK(feats[b][2] * static_cast<double>(span.size() - 1) ==
                  doctest::Approx(span.back().t - span.front().t));
        }
    }
}

TEST_CASE("burst count covers the trace duration") {
    TrafficTrace tr(testing::phone, {up(0, 10), up(10.4, 10)});
    CHECK(burst_count(tr) == 11);
    auto b = burstify(tr);
    REQUIRE(b.size() == 11);
    CHECK(b[0].size() == 1);
    CHECK(b[10].size() == 1);
    for (std::size_t i = 1; i < 10; ++i) CHECK(b[i].size() == 0);
}

TEST_CASE("app windows replicate boundary rows") {
    TrafficTrace tr(testing::phone, {up(0, 150), down(0.5, 300), up(2.5, 1500)});
    auto samples = extract_app_samples(tr, 5);
    REQUIRE(samples.size() == 3);
    const auto &s0 = samples[0].rows;
    // rows 0..2 are all copies of frame 0
    for (int r = 0; r < 3; ++r) {
        CHECK(s0[r * 3 + 0] == 0.0);
        CHECK(s0[r * 3 + 1] == doctest::Approx(0.1));
        CHECK(s0[r * 3 + 2] == 1.0);
    }
    CHECK(s0[3 * 3 + 0] == doctest::Approx(0.5));
    CHECK(s0[3 * 3 + 2] == -1.0);
    // gap of 2 s is clipped to 1
    CHECK(s0[4 * 3 + 0] == doctest::Approx(1.0));
    const auto &s2 = samples[2].rows;
    CHECK(s2[4 * 3 + 1] == doctest::Approx(1.0));
    CHECK(s2[3 * 3 + 1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(extract_app_samples(tr, 30), Error);
}

TEST_CASE("scaler zeroes constant features and standardizes the rest") {
    std::vector<BurstFeatures> train(4);
    for (std::size_t i = 0; i < 4; ++i) {
        train[i].p.fill(7.0);
        train[i].p[1] = static_cast<double>(i);
    }
    auto s = FeatureScaler::fit(train);
    auto z = s.transform(train[3]);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == doctest::Approx((3 - 1.5) / std::sqrt(1.25)));

    auto samples = extract_action_samples(train, 3, s);
    REQUIRE(samples.size() == 4);
    CHECK(samples[0].rows.size() == 3 * burst_feature_count);
    // first row of sample 0 repeats burst 0
    CHECK(samples[0].rows[1] == samples[0].rows[burst_feature_count + 1]);
    CHECK_THROWS_AS(extract_action_samples(train, 4, s), Error);
}

TEST_CASE("density curve integrates to about one") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(5, 2);
    std::vector<double> v(500);
    for (auto &x : v) x = nd(rng);
    auto curve = density_curve(v, 256);
    REQUIRE(curve.size() == 256);
    double area = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += (curve[i].first - curve[i - 1].first) * (curve[i].second + curve[i - 1].second) / 2;
    }
    CHECK(area == doctest::Approx(1.0).epsilon(0.02));
}
