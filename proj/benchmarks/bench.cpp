#include <benchmark/benchmark.h>

#include <random>

#include "macprint/featex.hpp"
#include "macprint/ingest.hpp"
#include "macprint/profiler.hpp"
#include "macprint/synthgen.hpp"
#include "macprint/tcn.hpp"

using namespace macprint;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> v(n);
    for (auto &x : v) x = nd(rng);
    return v;
}

std::vector<BehaviorSample> samples(std::size_t n, std::size_t w) {
    std::mt19937_64 rng(3);
    std::vector<BehaviorSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        BehaviorSequence seq;
        seq.mac = MacAddress{{0x0a, 0, 0, 0, static_cast<std::uint8_t>(i >> 8), static_cast<std::uint8_t>(i)}};
        for (std::size_t k = 0; k < w; ++k) seq.operations.push_back({onehot_encode(rng() % 9, 9), onehot_encode(rng() % 5, 5)});
        out.push_back(behavior_windows(seq, w)[0]);
    }
    return out;
}

}  // namespace

// app classifier at the default shape, per frame
static void BM_TcnForward(benchmark::State &state) {
    TcnConfig cfg;
    TcnModel m(cfg, 31, app_channels, 8);
    const auto batch = static_cast<std::size_t>(state.range(0));
    auto x = noise(batch * m.input_size(), 1);
    for (auto _ : state) benchmark::DoNotOptimize(m.activations(x, batch));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TcnForward)->Arg(1)->Arg(64);

static void BM_TcnBackward(benchmark::State &state) {
    TcnConfig cfg;
    TcnModel m(cfg, 31, app_channels, 8);
    auto x = noise(32 * m.input_size(), 2);
    std::vector<std::size_t> labels(32);
    for (std::size_t i = 0; i < 32; ++i) labels[i] = i % 8;
    std::vector<double> grad(m.parameter_count());
    for (auto _ : state) benchmark::DoNotOptimize(m.loss(x, labels, grad));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TcnBackward);

static void BM_BurstFeatures(benchmark::State &state) {
    Scenario sc;
    sc.horizon = 200;
    AppProfile app;
    app.name = "bench";
    ActionProfile a;
    a.uplink_rate = 20;
    a.downlink_rate = 30;
    a.duration = {150, 1};
    app.actions = {a};
    sc.apps = {app};
    UserScript u;
    u.name = "u";
    u.sessions = {{10, 160, 0}};
    sc.users = {u};
    auto g = generate_scenario(sc);
    auto ds = segment_traces(filter_data_frames(g.capture, sc.ap));
    const auto &trace = ds.traces.at(0);
    for (auto _ : state) benchmark::DoNotOptimize(trace_burst_features(trace));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.size()));
}
BENCHMARK(BM_BurstFeatures);

static void BM_Segment(benchmark::State &state) {
    Scenario sc;
    sc.horizon = 600;
    AppProfile app;
    app.name = "bench";
    app.actions = {ActionProfile{}};
    sc.apps = {app};
    for (int i = 0; i < 4; ++i) {
        UserScript u;
        u.name = "u" + std::to_string(i);
        u.sessions = {{20.0 + 100 * i, 200, 0}};
        sc.users.push_back(u);
    }
    auto g = generate_scenario(sc);
    auto frames = filter_data_frames(g.capture, sc.ap);
    for (auto _ : state) benchmark::DoNotOptimize(segment_traces(frames));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_Segment);

static void BM_Hamming(benchmark::State &state) {
    auto s = samples(2, 20);
    for (auto _ : state) benchmark::DoNotOptimize(hamming(s[0].flat, s[1].flat));
}
BENCHMARK(BM_Hamming);

static void BM_Silhouette(benchmark::State &state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto s = samples(n, 20);
    DistanceMatrix d(s);
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = i % 4;
    for (auto _ : state) benchmark::DoNotOptimize(silhouette(d, assign));
}
BENCHMARK(BM_Silhouette)->Arg(200)->Arg(1000);

static void BM_KMeans(benchmark::State &state) {
    auto s = samples(500, 20);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans_hamming(s, 5));
}
BENCHMARK(BM_KMeans);

BENCHMARK_MAIN();
