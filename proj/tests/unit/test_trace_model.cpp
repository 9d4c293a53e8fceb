#include <doctest.h>

#include <random>

#include "helpers.hpp"

using namespace macprint;
using testing::up;

TEST_CASE("trace duration") {
    TrafficTrace t(testing::phone, {up(0.0, 100), up(1.5, 100), up(4.0, 100)});
    CHECK(trace_duration(t) == doctest::Approx(4.0));
    TrafficTrace single(testing::phone, {up(7.2, 100)});
    CHECK(trace_duration(single) == 0.0);
}

TEST_CASE("trace rejects empty and unordered frames") {
    CHECK_THROWS_AS(TrafficTrace(testing::phone, {}), Error);
    CHECK_THROWS_AS(TrafficTrace(testing::phone, {up(2.0, 10), up(1.0, 10)}), Error);
}

TEST_CASE("duration matches recomputation on random traces") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> gap(0.0, 0.7);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<FrameMeta> frames;
        double t = gap(rng) * 100;
        for (int i = 0; i < 1 + rep; ++i) {
            frames.push_back(up(t, 60));
            t += gap(rng);
        }
        const double expect = frames.back().t - frames.front().t;
        TrafficTrace tr(testing::phone, frames);
        CHECK(std::abs(tr.duration() - expect) <= 1e-9);
    }
}

TEST_CASE("one-hot encode and decode") {
    auto a = onehot_encode(0, 3);
    CHECK(a.bits() == std::vector<std::uint8_t>{1, 0, 0});
    auto u = onehot_encode(7, 8);
    CHECK(u.is_last());
    std::vector<std::uint8_t> b{0, 1, 0};
    CHECK(onehot_decode(b) == 1);
    CHECK_THROWS(onehot_encode(3, 3));
    std::vector<std::uint8_t> two{1, 1, 0};
    CHECK_THROWS_AS(onehot_decode(two), Error);
    std::vector<std::uint8_t> none{0, 0};
    CHECK_THROWS_AS(onehot_decode(none), Error);
    for (std::size_t dims = 1; dims < 12; ++dims) {
        for (std::size_t i = 0; i < dims; ++i) {
            auto bits = onehot_encode(i, dims).bits();
            CHECK(onehot_decode(bits) == i);
        }
    }
}

TEST_CASE("operation label flattens to weight two and back") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t h = 2 + rng() % 40, g = 2 + rng() % 6;
        OperationLabel op{onehot_encode(rng() % (h + 1), h + 1), onehot_encode(rng() % (g + 1), g + 1)};
        auto flat = op.flatten();
        REQUIRE(flat.size() == h + g + 2);
        CHECK(std::count(flat.begin(), flat.end(), 1) == 2);
        CHECK(OperationLabel::unflatten(flat, h + 1) == op);
    }
}

TEST_CASE("mac address text form") {
    auto m = MacAddress::parse("0A:1b:2C:3d:4E:5f");
    CHECK(m.str() == "0a:1b:2c:3d:4e:5f");
    CHECK(MacAddress::parse(m.str()) == m);
    CHECK_FALSE(MacAddress::try_parse("0a:1b:2c:3d:4e").has_value());
    CHECK_FALSE(MacAddress::try_parse("0a:1b:2c:3d:4e:zz").has_value());
    CHECK_THROWS_AS(MacAddress::parse("nonsense"), Error);
    CHECK(MacAddress::parse("00:00:00:00:00:01") < MacAddress::parse("00:00:00:00:00:02"));
}

TEST_CASE("frame kinds round-trip through text") {
    for (auto k : {FrameKind::management, FrameKind::control, FrameKind::data}) {
        CHECK(frame_kind_from_string(to_string(k)) == k);
    }
    CHECK_FALSE(frame_kind_from_string("beacon").has_value());
}

TEST_CASE("mapping table keeps rectangles of one app disjoint") {
    ActionMappingTable t;
    t.add("app", Rect{0, 0, 100, 100}, 0);
    t.add("app", Rect{100, 0, 200, 100}, 1);
    t.add("other", Rect{50, 50, 150, 150}, 0);
    CHECK_THROWS_AS(t.add("app", Rect{50, 50, 150, 150}, 2), Error);
    CHECK(t.lookup("app", 99, 10) == 0u);
    CHECK(t.lookup("app", 100, 10) == 1u);
    CHECK_FALSE(t.lookup("app", 500, 10).has_value());
    CHECK_FALSE(t.lookup("missing", 1, 1).has_value());
}

TEST_CASE("dataset groups traces by device") {
    TraceDataset ds;
    auto other = MacAddress::parse("0a:00:00:00:00:08");
    ds.traces.emplace_back(testing::phone, std::vector<FrameMeta>{up(0, 10)});
    ds.traces.emplace_back(other, std::vector<FrameMeta>{testing::frame(1, 10, Direction::uplink, other)});
    ds.traces.emplace_back(testing::phone, std::vector<FrameMeta>{up(5, 10)});
    CHECK(ds.trace_count() == 3);
    CHECK(ds.mac_count() == 2);
    auto g = ds.by_mac();
    std::size_t total = 0;
    for (const auto &[mac, idx] : g) total += idx.size();
    CHECK(total == ds.trace_count());
    CHECK(g[testing::phone] == std::vector<std::size_t>{0, 2});
}
