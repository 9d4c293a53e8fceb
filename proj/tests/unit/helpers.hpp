#pragma once

#include <random>
#include <vector>

#include "macprint/synthgen.hpp"
#include "macprint/trace_model.hpp"

namespace testing {

using namespace macprint;

inline const MacAddress ap = MacAddress::parse("02:00:00:00:00:01");
inline const MacAddress phone = MacAddress::parse("0a:00:00:00:00:07");

inline FrameMeta frame(double t, std::uint32_t size, Direction dir, const MacAddress &dev = phone) {
    FrameMeta f;
    f.t = t;
    f.size = size;
    f.dir = dir;
    f.src = dir == Direction::uplink ? dev : ap;
    f.dst = dir == Direction::uplink ? ap : dev;
    return f;
}

inline FrameMeta up(double t, std::uint32_t size) { return frame(t, size, Direction::uplink); }
inline FrameMeta down(double t, std::uint32_t size) { return frame(t, size, Direction::downlink); }

/// evenly spaced frames at `fps` over [t0, t0 + seconds)
inline std::vector<FrameMeta> steady(double t0, double seconds, double fps, const MacAddress &dev = phone) {
    std::vector<FrameMeta> out;
    const auto n = static_cast<std::size_t>(seconds * fps);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(frame(t0 + static_cast<double>(i) / fps, 200, i % 2 ? Direction::downlink : Direction::uplink, dev));
    }
    return out;
}

inline ActionProfile simple_action(double up_size, double down_size, int x0) {
    ActionProfile a;
    a.name = "act" + std::to_string(x0);
    a.uplink_rate = 6;
    a.downlink_rate = 6;
    a.uplink_size = {up_size, 10};
    a.downlink_size = {down_size, 10};
    a.duration = {6, 1};
    a.button = Rect{x0, 0, x0 + 100, 100};
    return a;
}

/// one user, `apps` apps with two actions each, sessions back to back
inline Scenario small_scenario(std::size_t apps = 2, double session = 60, std::uint64_t seed = 7) {
    Scenario sc;
    sc.seed = seed;
    for (std::size_t a = 0; a < apps; ++a) {
        AppProfile app;
        app.name = "com.test.app" + std::to_string(a);
        app.category = "cat" + std::to_string(a);
        app.actions = {simple_action(200 + 300.0 * static_cast<double>(a), 900, 0),
                       simple_action(250 + 300.0 * static_cast<double>(a), 400, 200)};
        sc.apps.push_back(app);
    }
    UserScript u;
    u.name = "alice";
    double t = 20;
    for (std::size_t a = 0; a < apps; ++a) {
        u.sessions.push_back({t, session, static_cast<int>(a)});
        t += session + 40;
    }
    sc.horizon = t + 20;
    sc.background_pad = 15;
    sc.users.push_back(u);
    return sc;
}

}  // namespace testing
