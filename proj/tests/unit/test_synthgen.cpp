#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "macprint/annotate.hpp"
#include "macprint/ingest.hpp"

using namespace macprint;

namespace {

std::string capture_text(const GeneratedScenario &g) {
    std::ostringstream out;
    write_capture(out, g.capture);
    return out.str();
}

Scenario one_app_one_action() {
    Scenario sc;
    sc.seed = 7;
    sc.horizon = 60;
    AppProfile app;
    app.name = "com.test.solo";
    app.category = "solo";
    app.actions = {testing::simple_action(300, 700, 0)};
    sc.apps = {app};
    UserScript u;
    u.name = "u";
    u.sessions = {{5, 50, 0}};
    sc.users = {u};
    return sc;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    auto sc = one_app_one_action();
    auto a = generate_scenario(sc);
    auto b = generate_scenario(sc);
    CHECK(capture_text(a) == capture_text(b));
    CHECK(a.logs == b.logs);
    sc.seed = 8;
    auto c = generate_scenario(sc);
    CHECK(capture_text(a) != capture_text(c));
}

TEST_CASE("written artifacts are byte-identical across runs") {
    auto sc = testing::small_scenario();
    auto dir = std::filesystem::temp_directory_path() / "macprint_synth_det";
    std::filesystem::remove_all(dir);
    write_generated(dir / "a", sc, generate_scenario(sc));
    write_generated(dir / "b", sc, generate_scenario(sc));
    for (const auto *name : {"capture.csv", "truth.jsonl", "scenario.txt", "devices.txt"}) {
        std::ifstream fa(dir / "a" / name), fb(dir / "b" / name);
        std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        CHECK_MESSAGE(sa == sb, name);
        CHECK(!sa.empty());
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("hourly rotation over two hours gives several pseudonyms") {
    auto sc = testing::small_scenario(1, 60);
    sc.horizon = 7200;
    sc.users[0].mac_rotation_period = 3600;
    sc.users[0].sessions = {{100, 60, 0}, {3700, 60, 0}, {7000, 60, 0}};
    auto g = generate_scenario(sc);
    std::set<MacAddress> macs;
    for (const auto &p : g.truth.pseudonyms) {
        if (p.user == 0) macs.insert(p.mac);
    }
    CHECK(macs.size() >= 2);
    for (const auto &m : macs) CHECK((m.bytes()[0] & 0x02) != 0);
}

TEST_CASE("loss injection") {
    auto sc = testing::small_scenario(3, 120);
    auto g = generate_scenario(sc);
    auto same = inject_loss(g.capture, 0.0, 1);
    CHECK(same == g.capture);

    std::vector<FrameMeta> many(100000);
    for (std::size_t i = 0; i < many.size(); ++i) {
        many[i].t = static_cast<double>(i) * 1e-3;
        many[i].id = static_cast<std::uint32_t>(i);
    }
    auto kept = inject_loss(many, 0.25, 9);
    const double dropped = static_cast<double>(many.size() - kept.size());
    const double sigma = std::sqrt(1e5 * 0.25 * 0.75);
    CHECK(std::abs(dropped - 25000) <= 3 * sigma);
    CHECK(inject_loss(many, 0.25, 9) == kept);
    for (std::size_t i = 1; i < kept.size(); ++i) CHECK(kept[i - 1].id < kept[i].id);
    CHECK_THROWS_AS(inject_loss(many, 1.0, 1), Error);
}

TEST_CASE("frames obey their action clamps and taps hit their buttons") {
    auto sc = testing::small_scenario(2, 90);
    auto g = generate_scenario(sc);
    REQUIRE(g.capture.size() == g.truth.frames.size());
    for (std::size_t i = 0; i < g.capture.size(); ++i) {
        const auto &f = g.capture[i];
        CHECK(f.size >= 1);
        CHECK(f.size <= 1500);
        CHECK(f.t >= 0);
        if (i) CHECK(g.capture[i - 1].t <= f.t);
    }
    auto table = sc.mapping_table();
    std::size_t taps = 0;
    for (const auto &s : g.truth.sessions) taps += s.taps;
    // log times are rounded to microseconds, so a tap belongs to the latest
    // session starting within that rounding of it
    for (const auto &r : g.logs[0]) {
        const SessionTruth *owner = nullptr;
        for (const auto &s : g.truth.sessions) {
            if (s.start <= r.t + 1e-6 && (!owner || s.start > owner->start)) owner = &s;
        }
        REQUIRE(owner != nullptr);
        CHECK(r.app_name == sc.apps[static_cast<std::size_t>(owner->app)].name);
        CHECK(table.lookup(r.app_name, r.x, r.y) == static_cast<std::size_t>(owner->action));
    }
    CHECK(taps == g.truth.tap_count);
    CHECK(g.logs[0].size() == g.truth.tap_count);
}

TEST_CASE("truth file round-trips") {
    auto sc = testing::small_scenario();
    auto g = generate_scenario(sc);
    std::stringstream buf;
    write_ground_truth(buf, g.truth, g.capture);
    auto back = read_ground_truth(buf);
    REQUIRE(back.frames.size() == g.truth.frames.size());
    CHECK(back.sessions.size() == g.truth.sessions.size());
    CHECK(back.pseudonyms.size() == g.truth.pseudonyms.size());
    CHECK(back.tap_count == g.truth.tap_count);
    for (std::size_t i = 0; i < back.frames.size(); ++i) {
        CHECK(back.frames[i].app == g.truth.frames[i].app);
        CHECK(back.frames[i].action == g.truth.frames[i].action);
    }
}

TEST_CASE("scenario text round-trips") {
    auto sc = testing::small_scenario(3);
    sc.users[0].preferences = {{0, 0, 0.25}, {1, 1, 0.75}};
    std::stringstream buf;
    write_scenario(buf, sc);
    auto back = parse_scenario(buf);
    CHECK(back == sc);
}

TEST_CASE("scenario validation") {
    auto sc = testing::small_scenario();
    sc.horizon = 0;
    CHECK_THROWS_AS(generate_scenario(sc), Error);
    sc = testing::small_scenario();
    sc.users[0].preferences = {{0, 0, 0.5}};
    CHECK_THROWS_AS(sc.validate(), Error);
    sc = testing::small_scenario();
    sc.apps[0].actions[1].button = sc.apps[0].actions[0].button;
    CHECK_THROWS_AS(sc.mapping_table(), Error);
}

TEST_CASE("catalog presets") {
    auto apps = default_catalog({10, 4, 11, 8});
    REQUIRE(apps.size() == 10);
    std::set<std::string> categories;
    for (const auto &a : apps) {
        categories.insert(a.category);
        CHECK(a.actions.size() == 4);
    }
    CHECK(categories.size() == 5);
    // apps past novel_from sit outside the range spanned by the known ones
    double known_max = 0;
    for (std::size_t a = 0; a < 8; ++a) {
        for (const auto &ac : apps[a].actions) known_max = std::max(known_max, ac.uplink_size.mean);
    }
    for (std::size_t a = 8; a < 10; ++a) {
        for (const auto &ac : apps[a].actions) CHECK(ac.uplink_size.mean > known_max + 200);
    }
}

TEST_CASE("room preset gives one rotating pseudonym per user and day") {
    RoomPlan plan;
    plan.users = 3;
    plan.days = 2;
    plan.sessions_per_day = 1;
    plan.session_length = 60;
    auto sc = room_scenario(default_catalog({10, 4, 11, 8}), plan, MacAddress::parse("02:00:00:00:01:01"), 5);
    auto g = generate_scenario(sc);
    std::set<MacAddress> macs;
    for (const auto &p : g.truth.pseudonyms) macs.insert(p.mac);
    CHECK(macs.size() == 6);
    auto reg = device_registry(sc, g.truth);
    CHECK(reg.users.size() == 3);
    std::stringstream buf;
    write_device_registry(buf, reg);
    auto back = read_device_registry(buf);
    CHECK(back.entries == reg.entries);
}
