#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "macprint/annotate.hpp"
#include "macprint/featex.hpp"
#include "macprint/ingest.hpp"

using namespace macprint;
using testing::up;

namespace {

InteractionLog parse(const std::string &text) {
    std::istringstream in(text);
    return parse_interaction_log(in);
}

ActionMappingTable two_buttons() {
    ActionMappingTable t;
    t.add("a", Rect{0, 0, 100, 100}, 0);
    t.add("a", Rect{200, 0, 300, 100}, 1);
    return t;
}

TrafficTrace ticking(double t0, double seconds) {
    std::vector<FrameMeta> f;
    for (double t = t0; t < t0 + seconds; t += 0.1) f.push_back(up(t, 100));
    return TrafficTrace(testing::phone, f);
}

}  // namespace

TEST_CASE("log line format") {
    auto log = parse("12.500|com.tencent.mm|540,1800\n");
    REQUIRE(log.records.size() == 1);
    CHECK(log.records[0].t == doctest::Approx(12.5));
    CHECK(log.records[0].app_name == "com.tencent.mm");
    CHECK(log.records[0].x == 540);
    CHECK(log.records[0].y == 1800);
    CHECK(log.warnings.empty());

    CHECK_THROWS_AS(parse("12.5|com.x|540\n"), ParseError);
    CHECK_THROWS_AS(parse("12.5|com.x\n"), ParseError);
    CHECK_THROWS_AS(parse("-1|com.x|1,2\n"), ParseError);
    CHECK_THROWS_AS(parse("1||1,2\n"), ParseError);
}

TEST_CASE("out-of-order records are sorted with a warning") {
    auto log = parse("5|a|1,1\n2|a|1,1\n9|b|1,1\n");
    REQUIRE(log.records.size() == 3);
    CHECK(log.records[0].t == 2);
    CHECK(log.records[2].t == 9);
    CHECK(log.warnings.size() == 1);
}

TEST_CASE("generated logs parse back to one record per tap") {
    auto sc = testing::small_scenario(2, 60);
    auto g = generate_scenario(sc);
    std::stringstream buf;
    write_interaction_log(buf, g.logs[0]);
    auto log = parse_interaction_log(buf);
    CHECK(log.records.size() == g.truth.tap_count);
    CHECK(log.warnings.empty());
}

TEST_CASE("frames inherit the foreground app") {
    std::vector<std::string> apps{"a", "b"};
    auto trace = ticking(0, 60);

    std::vector<InteractionRecord> single{{0, "a", 1, 1}, {10, "a", 1, 1}};
    auto labels = label_frames_by_app(trace, single, apps);
    CHECK(std::all_of(labels.begin(), labels.end(), [](int l) { return l == 0; }));

    std::vector<InteractionRecord> change{{0, "a", 1, 1}, {30, "b", 1, 1}};
    labels = label_frames_by_app(trace, change, apps);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        CHECK(labels[i] == (trace.frames()[i].t < 30 ? 0 : 1));
    }

    std::vector<InteractionRecord> late{{20, "a", 1, 1}};
    labels = label_frames_by_app(trace, late, apps);
    CHECK(labels.front() == unknown_label);
    CHECK(labels.back() == 0);

    std::vector<InteractionRecord> foreign{{0, "zzz", 1, 1}};
    labels = label_frames_by_app(trace, foreign, apps);
    CHECK(labels.front() == unknown_label);
}

TEST_CASE("bursts take the action of the latest mapped tap") {
    auto table = two_buttons();
    auto trace = ticking(100, 10);
    REQUIRE(burst_count(trace) == 10);

    std::vector<InteractionRecord> log{{103.2, "a", 50, 50}};
    auto labels = label_bursts_by_action(trace, log, table);
    CHECK(labels[3] == 0);
    CHECK(std::count(labels.begin(), labels.end(), unknown_label) == 9);

    auto none = label_bursts_by_action(trace, {}, table);
    CHECK(std::all_of(none.begin(), none.end(), [](int l) { return l == unknown_label; }));

    std::vector<InteractionRecord> two{{105.1, "a", 50, 50}, {105.8, "a", 250, 50}};
    labels = label_bursts_by_action(trace, two, table);
    CHECK(labels[5] == 1);

    std::vector<InteractionRecord> miss{{105.1, "a", 150, 50}, {106.0, "b", 50, 50}};
    labels = label_bursts_by_action(trace, miss, table);
    CHECK(std::count(labels.begin(), labels.end(), unknown_label) == 10);
}

TEST_CASE("annotation agrees with generator truth") {
    auto sc = testing::small_scenario(3, 90);
    auto g = generate_scenario(sc);
    auto frames = filter_data_frames(g.capture, sc.ap);
    auto ds = segment_traces(frames);
    REQUIRE(!ds.traces.empty());
    auto names = sc.app_names();
    auto table = sc.mapping_table();
    std::size_t agree = 0, total = 0;
    for (const auto &tr : ds.traces) {
        auto ann = annotate_trace(tr, g.logs[0], table, names);
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const auto &truth = g.truth.frames[tr.frames()[i].id];
            if (truth.action < 0) continue;  // background around a session
            ++total;
            agree += ann.frame_app_labels[i] == truth.app;
        }
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("labels do not depend on the order log lines were written in") {
    auto sc = testing::small_scenario(2, 60);
    auto g = generate_scenario(sc);
    auto ds = segment_traces(filter_data_frames(g.capture, sc.ap));
    auto names = sc.app_names();
    auto table = sc.mapping_table();

    std::stringstream sorted_text;
    write_interaction_log(sorted_text, g.logs[0]);
    auto sorted = parse_interaction_log(sorted_text);

    auto shuffled_records = g.logs[0];
    std::mt19937_64 rng(4);
    std::shuffle(shuffled_records.begin(), shuffled_records.end(), rng);
    std::stringstream shuffled_text;
    write_interaction_log(shuffled_text, shuffled_records);
    auto shuffled = parse_interaction_log(shuffled_text);

    for (const auto &tr : ds.traces) {
        auto a = annotate_trace(tr, sorted.records, table, names);
        auto b = annotate_trace(tr, shuffled.records, table, names);
        CHECK(a.frame_app_labels == b.frame_app_labels);
        CHECK(a.burst_action_labels == b.burst_action_labels);
    }
}
