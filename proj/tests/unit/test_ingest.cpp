#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "macprint/ingest.hpp"

using namespace macprint;
using testing::ap;
using testing::phone;

namespace {

std::vector<FrameMeta> parse(const std::string &text) {
    std::istringstream in(text);
    return parse_capture(in);
}

std::size_t frames_in(const TraceDataset &ds) {
    std::size_t n = 0;
    for (const auto &t : ds.traces) n += t.size();
    return n;
}

}  // namespace

TEST_CASE("capture parsing") {
    auto frames = parse(
        "t_rel_s,src_mac,dst_mac,size_bytes,kind\n"
        "0.000100,0a:00:00:00:00:07,02:00:00:00:00:01,120,data\n"
        "0.250000,02:00:00:00:00:01,0a:00:00:00:00:07,1400,data\n"
        "0.300000,02:00:00:00:00:01,ff:ff:ff:ff:ff:ff,80,mgmt\n");
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].t == doctest::Approx(0.0001));
    CHECK(frames[1].size == 1400);
    CHECK(frames[2].kind == FrameKind::management);
    CHECK(frames[2].id == 2);
}

TEST_CASE("zero-size row is rejected with its line number") {
    try {
        parse("t_rel_s,src_mac,dst_mac,size_bytes,kind\n"
              "0.1,0a:00:00:00:00:07,02:00:00:00:00:01,120,data\n"
              "0.2,0a:00:00:00:00:07,02:00:00:00:00:01,0,data\n");
        FAIL("expected a parse error");
    } catch (const ParseError &e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse("time,src\n"), ParseError);
    CHECK_THROWS_AS(parse("t_rel_s,src_mac,dst_mac,size_bytes,kind\n0.1,zz,02:00:00:00:00:01,5,data\n"), ParseError);
    CHECK_THROWS_AS(parse("t_rel_s,src_mac,dst_mac,size_bytes,kind\n0.1,0a:00:00:00:00:07,02:00:00:00:00:01,5,beacon\n"),
                    ParseError);
}

TEST_CASE("capture write then parse is lossless at microsecond resolution") {
    std::mt19937_64 rng(1);
    std::vector<FrameMeta> frames;
    double t = 0;
    for (std::uint32_t i = 0; i < 500; ++i) {
        t += static_cast<double>(rng() % 100000) * 1e-6;
        auto f = testing::frame(t, 1 + static_cast<std::uint32_t>(rng() % 1500), rng() % 2 ? Direction::uplink : Direction::downlink);
        f.kind = static_cast<FrameKind>(rng() % 3);
        f.id = i;
        frames.push_back(f);
    }
    std::stringstream buf;
    write_capture(buf, frames);
    auto back = parse_capture(buf);
    REQUIRE(back.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(std::abs(back[i].t - frames[i].t) < 1e-9);
        CHECK(back[i].size == frames[i].size);
        CHECK(back[i].src == frames[i].src);
        CHECK(back[i].dst == frames[i].dst);
        CHECK(back[i].kind == frames[i].kind);
    }
}

TEST_CASE("filter keeps data frames of the AP and tags direction") {
    auto other_ap = MacAddress::parse("02:00:00:00:00:99");
    std::vector<FrameMeta> in;
    FrameMeta f;
    f.src = phone;
    f.dst = ap;
    f.kind = FrameKind::data;
    in.push_back(f);  // uplink
    f.src = ap;
    f.dst = phone;
    f.t = 1;
    in.push_back(f);  // downlink
    f.kind = FrameKind::management;
    in.push_back(f);
    f.kind = FrameKind::control;
    in.push_back(f);
    f.kind = FrameKind::data;
    f.src = other_ap;
    in.push_back(f);  // foreign
    FilterReport rep;
    auto out = filter_data_frames(in, ap, &rep);
    REQUIRE(out.size() == 2);
    CHECK(out[0].dir == Direction::uplink);
    CHECK(out[1].dir == Direction::downlink);
    CHECK(rep.kept == 2);
    CHECK(rep.non_data == 2);
    CHECK(rep.foreign == 1);
}

TEST_CASE("generator beacon share is removed exactly") {
    auto sc = testing::small_scenario();
    sc.mgmt_fraction = 0.2;
    auto gen = generate_scenario(sc);
    std::size_t data = 0;
    for (const auto &f : gen.capture) data += f.kind == FrameKind::data;
    auto kept = filter_data_frames(gen.capture, sc.ap);
    CHECK(kept.size() == data);
    const double share = static_cast<double>(data) / static_cast<double>(gen.capture.size());
    CHECK(share == doctest::Approx(0.8).epsilon(0.03));

    std::stringstream buf;
    write_capture(buf, gen.capture);
    CHECK(parse_capture(buf).size() == gen.capture.size());
}

TEST_CASE("segmentation of steady and background traffic") {
    SegmenterConfig cfg;
    auto busy = testing::steady(0, 60, 10);
    auto ds = segment_traces(busy, cfg);
    REQUIRE(ds.traces.size() == 1);
    CHECK(ds.traces[0].size() >= 590);

    auto drip = testing::steady(0, 120, 1);
    CHECK(segment_traces(drip, cfg).traces.empty());

    auto two = testing::steady(0, 20, 10);
    auto later = testing::steady(50, 20, 10);
    two.insert(two.end(), later.begin(), later.end());
    auto split = segment_traces(two, cfg);
    REQUIRE(split.traces.size() == 2);
    CHECK(split.traces[0].end() < 21);
    CHECK(split.traces[1].start() >= 49);

    auto sliver = testing::steady(0, 2, 10);
    CHECK(segment_traces(sliver, cfg).traces.empty());
}

TEST_CASE("segmentation keeps devices apart") {
    auto other = MacAddress::parse("0a:00:00:00:00:08");
    auto a = testing::steady(0, 30, 8, phone);
    auto b = testing::steady(0.05, 30, 8, other);
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end(), [](const auto &x, const auto &y) { return x.t < y.t; });
    auto ds = segment_traces(a);
    REQUIRE(ds.traces.size() == 2);
    for (const auto &t : ds.traces) {
        for (const auto &f : t.frames()) CHECK(device_of(f) == t.mac());
    }
}

TEST_CASE("generated sessions become traces at the true boundaries") {
    auto sc = testing::small_scenario(2, 60);
    auto gen = generate_scenario(sc);
    auto frames = filter_data_frames(gen.capture, sc.ap);
    SegmenterConfig cfg;
    auto ds = segment_traces(frames, cfg);
    REQUIRE(ds.traces.size() == 2);
    for (int app = 0; app < 2; ++app) {
        double start = 1e18, end = -1;
        for (const auto &s : gen.truth.sessions) {
            if (s.app != app) continue;
            start = std::min(start, s.start);
            end = std::max(end, s.end);
        }
        const auto &t = ds.traces[static_cast<std::size_t>(app)];
        CHECK(std::abs(t.start() - start) <= cfg.rate_window);
        CHECK(std::abs(t.end() - end) <= cfg.rate_window);
    }
}

TEST_CASE("segmentation properties on random traffic") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<FrameMeta> frames;
        double t = 0;
        for (int burst = 0; burst < 6; ++burst) {
            const double fps = 1 + static_cast<double>(rng() % 12);
            const double len = 3 + static_cast<double>(rng() % 20);
            auto part = testing::steady(t, len, fps);
            frames.insert(frames.end(), part.begin(), part.end());
            t += len + static_cast<double>(rng() % 8);
        }
        for (std::size_t i = 0; i < frames.size(); ++i) frames[i].id = static_cast<std::uint32_t>(i);
        SegmenterConfig cfg;
        auto ds = segment_traces(frames, cfg);

        // every output frame is an input frame, in order
        std::set<std::uint32_t> ids;
        for (const auto &tr : ds.traces) {
            for (std::size_t i = 0; i < tr.size(); ++i) {
                const auto &f = tr.frames()[i];
                REQUIRE(f.id < frames.size());
                CHECK(frames[f.id] == f);
                CHECK(ids.insert(f.id).second);
                if (i) CHECK(tr.frames()[i - 1].id < f.id);
            }
        }
        // idempotent on each trace
        for (const auto &tr : ds.traces) {
            std::vector<FrameMeta> again(tr.frames().begin(), tr.frames().end());
            auto re = segment_traces(again, cfg);
            REQUIRE(re.traces.size() == 1);
            CHECK(re.traces[0].size() == tr.size());
        }
        // lowering gamma never loses frames
        std::size_t prev = 0;
        for (double gamma : {8.0, 6.0, 4.0, 3.0, 2.0, 1.0, 0.5}) {
            cfg.gamma = gamma;
            auto n = frames_in(segment_traces(frames, cfg));
            CHECK(n >= prev);
            prev = n;
        }
    }
}

TEST_CASE("segmenter config validation") {
    SegmenterConfig cfg;
    cfg.gamma = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.min_trace_frames = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
