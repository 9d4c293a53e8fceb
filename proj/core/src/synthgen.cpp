#include "macprint/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace macprint {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0x5eedu};
    return std::mt19937_64(seq);
}

double to_microseconds(double t) {
    return std::round(t * 1e6) / 1e6;
}

std::uint32_t draw_size(std::mt19937_64 &rng, const Gaussian &g) {
    std::normal_distribution<double> nd(g.mean, g.stddev > 0 ? g.stddev : 1e-12);
    double v = std::round(nd(rng));
    return static_cast<std::uint32_t>(std::clamp(v, 1.0, 1500.0));
}

struct Emitted {
    FrameMeta frame;
    FrameTruth truth;
};

class UserGenerator {
public:
    UserGenerator(const Scenario &sc, std::size_t user, int &session_counter, GroundTruth &truth)
        : sc_{sc}, user_{user}, script_{sc.users[user]}, rng_{stream(sc.seed, user + 1)},
          session_counter_{session_counter}, truth_{truth} {}

    void run(std::vector<Emitted> &out, std::vector<InteractionRecord> &log) {
        auto sessions = script_.sessions;
        std::sort(sessions.begin(), sessions.end(),
                  [](const UsageSession &a, const UsageSession &b) { return a.start < b.start; });

        std::size_t last_app = script_.preferences.empty() ? 0 : top_preference_app();
        std::vector<std::pair<double, double>> busy;
        for (const auto &s : sessions) {
            double start = std::max(0.0, s.start);
            double end = std::min(sc_.horizon, s.start + s.length);
            if (end <= start) continue;
            last_app = run_session(s, start, end, out, log);
            busy.emplace_back(start, end);
            background_app_.emplace_back(end, last_app);
        }
        emit_background(busy, out);
    }

private:
    std::size_t top_preference_app() const {
        auto it = std::max_element(script_.preferences.begin(), script_.preferences.end(),
                                   [](const Preference &a, const Preference &b) { return a.weight < b.weight; });
        return it->app;
    }

    MacAddress mac_at(double t) const {
        auto epoch = static_cast<std::uint64_t>(std::floor(t / script_.mac_rotation_period));
        return pseudonym_mac(sc_.seed, user_, epoch);
    }

    void push(std::vector<Emitted> &out, double t, Direction dir, std::uint32_t size, int app, int action,
              int session) {
        Emitted e;
        e.frame.t = t;
        e.frame.size = size;
        e.frame.dir = dir;
        e.frame.kind = FrameKind::data;
        MacAddress dev = mac_at(t);
        e.frame.src = dir == Direction::uplink ? dev : sc_.ap;
        e.frame.dst = dir == Direction::uplink ? sc_.ap : dev;
        e.truth = FrameTruth{static_cast<int>(user_), app, action, session};
        out.push_back(e);
    }

    // gamma renewal process; shape 1/burstiness keeps the mean gap at 1/rate
    void emit_stream(double rate, const Gaussian &size, double burstiness, Direction dir, double from, double to,
                     int app, int action, int session, std::vector<Emitted> &out) {
        if (rate <= 0) return;
        double shape = 1.0 / burstiness;
        std::gamma_distribution<double> gap(shape, burstiness / rate);
        double t = from + gap(rng_);
        while (t < to) {
            double ts = to_microseconds(t);
            if (ts >= from && ts < to) {
                push(out, ts, dir, draw_size(rng_, size), app, action, session);
            }
            t += gap(rng_);
        }
    }

    std::size_t pick_preference(const UsageSession &s) {
        std::vector<double> w;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < script_.preferences.size(); ++i) {
            const auto &p = script_.preferences[i];
            if (s.app < 0 || p.app == static_cast<std::size_t>(s.app)) {
                w.push_back(p.weight);
                idx.push_back(i);
            }
        }
        if (idx.empty()) return SIZE_MAX;
        std::discrete_distribution<std::size_t> dd(w.begin(), w.end());
        return idx[dd(rng_)];
    }

    std::size_t run_session(const UsageSession &s, double start, double end, std::vector<Emitted> &out,
                            std::vector<InteractionRecord> &log) {
        double t = start;
        std::size_t app = 0;
        while (t < end) {
            std::size_t action = 0;
            auto pref = pick_preference(s);
            if (pref == SIZE_MAX) {
                app = static_cast<std::size_t>(s.app);
                std::uniform_int_distribution<std::size_t> ud(0, sc_.apps[app].actions.size() - 1);
                action = ud(rng_);
            } else {
                app = script_.preferences[pref].app;
                action = script_.preferences[pref].action;
            }
            const auto &ap = sc_.apps[app].actions[action];
            std::normal_distribution<double> nd(ap.duration.mean, ap.duration.stddev > 0 ? ap.duration.stddev : 1e-12);
            double dur = std::max(sc_.min_action_duration, nd(rng_));
            double stop = std::min(t + dur, end);

            int sid = session_counter_++;
            SessionTruth st{sid, static_cast<int>(user_), static_cast<int>(app), static_cast<int>(action), t, stop, 0};

            std::uniform_int_distribution<int> ux(ap.button.x0, ap.button.x1 - 1);
            std::uniform_int_distribution<int> uy(ap.button.y0, ap.button.y1 - 1);
            for (double tap = t; tap < stop; tap += sc_.tap_interval) {
                int x = ux(rng_);
                int y = uy(rng_);
                log.push_back(InteractionRecord{to_microseconds(tap), sc_.apps[app].name, x, y});
                ++st.taps;
            }
            truth_.tap_count += st.taps;
            truth_.sessions.push_back(st);

            emit_stream(ap.uplink_rate, ap.uplink_size, ap.burstiness, Direction::uplink, t, stop,
                        static_cast<int>(app), static_cast<int>(action), sid, out);
            emit_stream(ap.downlink_rate, ap.downlink_size, ap.burstiness, Direction::downlink, t, stop,
                        static_cast<int>(app), static_cast<int>(action), sid, out);
            t = stop;
        }
        return app;
    }

    std::size_t background_app_at(double t, std::size_t fallback) const {
        std::size_t app = fallback;
        for (const auto &[end, a] : background_app_) {
            if (end <= t) app = a;
        }
        return app;
    }

    void emit_background(const std::vector<std::pair<double, double>> &busy, std::vector<Emitted> &out) {
        if (busy.empty() || sc_.apps.empty()) return;
        // presence = union of sessions padded on both sides, minus the sessions
        std::vector<std::pair<double, double>> presence;
        for (const auto &[s, e] : busy) {
            double a = std::max(0.0, s - sc_.background_pad);
            double b = std::min(sc_.horizon, e + sc_.background_pad);
            if (!presence.empty() && a <= presence.back().second) {
                presence.back().second = std::max(presence.back().second, b);
            } else {
                presence.emplace_back(a, b);
            }
        }
        std::size_t fallback = script_.preferences.empty() ? 0 : top_preference_app();
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (const auto &[a, b] : presence) {
            double t = a;
            while (true) {
                std::size_t app = background_app_at(t, fallback);
                double rate = sc_.apps[app].background_rate;
                if (rate <= 0) break;
                std::exponential_distribution<double> gap(rate);
                t += gap(rng_);
                if (t >= b) break;
                double ts = to_microseconds(t);
                bool inside_session = std::any_of(busy.begin(), busy.end(), [&](const auto &iv) {
                    return ts >= iv.first && ts < iv.second;
                });
                if (inside_session || ts >= b) continue;
                Direction dir = coin(rng_) < 0.5 ? Direction::uplink : Direction::downlink;
                push(out, ts, dir, draw_size(rng_, Gaussian{150, 40}), static_cast<int>(app), -1, -1);
            }
        }
    }

    const Scenario &sc_;
    std::size_t user_;
    const UserScript &script_;
    std::mt19937_64 rng_;
    int &session_counter_;
    GroundTruth &truth_;
    std::vector<std::pair<double, std::size_t>> background_app_;
};

}  // namespace

MacAddress pseudonym_mac(std::uint64_t seed, std::size_t user, std::uint64_t epoch) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(user * 0x100000001b3ULL + 7) ^ splitmix64(epoch + 0xabcdef));
    std::array<std::uint8_t, 6> b{};
    for (int i = 0; i < 6; ++i) {
        b[i] = static_cast<std::uint8_t>(h >> (8 * i));
    }
    b[0] = static_cast<std::uint8_t>((b[0] | 0x02) & 0xfe);
    return MacAddress{b};
}

void Scenario::validate() const {
    if (!(horizon > 0)) throw Error("scenario horizon must be positive");
    if (apps.empty()) throw Error("scenario has no apps");
    if (users.empty()) throw Error("scenario has no users");
    if (mgmt_fraction < 0 || ctrl_fraction < 0 || foreign_fraction < 0 || mgmt_fraction + ctrl_fraction >= 1 ||
        foreign_fraction >= 1) {
        throw Error("scenario noise fractions out of range");
    }
    if (!(tap_interval > 0)) throw Error("tap_interval must be positive");
    if (!(min_action_duration > 0)) throw Error("min_action_duration must be positive");
    std::set<std::string> names;
    for (const auto &a : apps) {
        if (!names.insert(a.name).second) throw Error("duplicate app " + a.name);
        if (a.actions.empty()) throw Error("app " + a.name + " has no actions");
        if (a.background_rate < 0) throw Error("app " + a.name + " has negative background rate");
        for (const auto &ac : a.actions) {
            if (!(ac.uplink_rate > 0) || !(ac.downlink_rate > 0)) {
                throw Error("action " + a.name + "/" + ac.name + " needs positive rates");
            }
            if (!(ac.burstiness > 0)) throw Error("action " + a.name + "/" + ac.name + " needs positive burstiness");
            if (!(ac.duration.mean > 0)) throw Error("action " + a.name + "/" + ac.name + " needs positive duration");
            if (ac.button.empty()) throw Error("action " + a.name + "/" + ac.name + " has an empty button");
        }
    }
    (void)mapping_table();  // rejects overlapping buttons
    for (const auto &u : users) {
        if (!(u.mac_rotation_period > 0)) throw Error("user " + u.name + " needs a positive rotation period");
        double total = 0;
        for (const auto &p : u.preferences) {
            if (p.app >= apps.size() || p.action >= apps[p.app].actions.size()) {
                throw Error("user " + u.name + " prefers an unknown app/action");
            }
            if (p.weight < 0) throw Error("user " + u.name + " has a negative preference");
            total += p.weight;
        }
        if (!u.preferences.empty() && std::abs(total - 1.0) > 1e-9) {
            throw Error("preferences of user " + u.name + " sum to " + std::to_string(total));
        }
        for (const auto &s : u.sessions) {
            if (s.app >= static_cast<int>(apps.size())) throw Error("session of " + u.name + " names unknown app");
            if (s.app < 0 && u.preferences.empty()) {
                throw Error("user " + u.name + " has unrestricted sessions but no preferences");
            }
        }
    }
}

ActionMappingTable Scenario::mapping_table() const {
    ActionMappingTable table;
    for (const auto &a : apps) {
        for (std::size_t i = 0; i < a.actions.size(); ++i) {
            table.add(a.name, a.actions[i].button, i);
        }
    }
    return table;
}

std::vector<std::string> Scenario::app_names() const {
    std::vector<std::string> out;
    for (const auto &a : apps) out.push_back(a.name);
    return out;
}

int GroundTruth::user_of(const MacAddress &mac) const {
    for (const auto &p : pseudonyms) {
        if (p.mac == mac) return p.user;
    }
    return -1;
}

GeneratedScenario generate_scenario(const Scenario &sc) {
    sc.validate();
    GeneratedScenario gen;
    gen.logs.resize(sc.users.size());
    std::vector<Emitted> emitted;
    int session_counter = 0;
    for (std::size_t u = 0; u < sc.users.size(); ++u) {
        UserGenerator g(sc, u, session_counter, gen.truth);
        g.run(emitted, gen.logs[u]);
        std::stable_sort(gen.logs[u].begin(), gen.logs[u].end(),
                         [](const InteractionRecord &a, const InteractionRecord &b) { return a.t < b.t; });
        auto epochs = static_cast<std::uint64_t>(std::ceil(sc.horizon / sc.users[u].mac_rotation_period));
        for (std::uint64_t e = 0; e < std::max<std::uint64_t>(epochs, 1); ++e) {
            double from = static_cast<double>(e) * sc.users[u].mac_rotation_period;
            double to = std::min(sc.horizon, from + sc.users[u].mac_rotation_period);
            gen.truth.pseudonyms.push_back(PseudonymTruth{pseudonym_mac(sc.seed, u, e), static_cast<int>(u), from, to});
        }
    }

    auto noise = stream(sc.seed, 0xfeed);
    std::uniform_real_distribution<double> when(0.0, sc.horizon);
    const double user_data = static_cast<double>(emitted.size());
    const auto foreign = static_cast<std::size_t>(std::llround(user_data * sc.foreign_fraction / (1 - sc.foreign_fraction)));
    const MacAddress foreign_ap{{0x02, 0xee, 0x00, 0x00, 0x00, 0x01}};
    const MacAddress foreign_sta{{0x02, 0xee, 0x00, 0x00, 0x00, 0x02}};
    for (std::size_t i = 0; i < foreign; ++i) {
        Emitted e;
        e.frame.t = to_microseconds(when(noise));
        e.frame.src = (i % 2) ? foreign_ap : foreign_sta;
        e.frame.dst = (i % 2) ? foreign_sta : foreign_ap;
        e.frame.size = draw_size(noise, Gaussian{600, 300});
        e.frame.kind = FrameKind::data;
        emitted.push_back(e);
    }
    const double data = static_cast<double>(emitted.size());
    const double total = data / (1 - sc.mgmt_fraction - sc.ctrl_fraction);
    const auto mgmt = static_cast<std::size_t>(std::llround(total * sc.mgmt_fraction));
    const auto ctrl = static_cast<std::size_t>(std::llround(total * sc.ctrl_fraction));
    for (std::size_t i = 0; i < mgmt + ctrl; ++i) {
        Emitted e;
        e.frame.t = to_microseconds(when(noise));
        e.frame.src = sc.ap;
        e.frame.dst = MacAddress::broadcast();
        e.frame.size = i < mgmt ? draw_size(noise, Gaussian{250, 30}) : 14;
        e.frame.kind = i < mgmt ? FrameKind::management : FrameKind::control;
        emitted.push_back(e);
    }

    std::stable_sort(emitted.begin(), emitted.end(),
                     [](const Emitted &a, const Emitted &b) { return a.frame.t < b.frame.t; });
    gen.capture.reserve(emitted.size());
    gen.truth.frames.reserve(emitted.size());
    for (std::size_t i = 0; i < emitted.size(); ++i) {
        emitted[i].frame.id = static_cast<std::uint32_t>(i);
        emitted[i].frame.dir = Direction::uplink;  // unknown until filtered against the AP
        gen.capture.push_back(emitted[i].frame);
        gen.truth.frames.push_back(emitted[i].truth);
    }
    return gen;
}

std::vector<FrameMeta> inject_loss(std::span<const FrameMeta> capture, double rate, std::uint64_t seed) {
    if (!(rate >= 0 && rate < 1)) {
        throw Error("loss rate must be in [0, 1)");
    }
    std::vector<FrameMeta> out;
    out.reserve(capture.size());
    auto rng = stream(seed, 0x1055);
    std::bernoulli_distribution drop(rate);
    for (const auto &f : capture) {
        if (!drop(rng)) out.push_back(f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// presets

namespace {

const char *const category_names[] = {"messaging", "social", "video", "music", "shopping"};
const char *const category_actions[5][4] = {
    {"text", "voice", "images", "video_chat"},
    {"browse", "comment", "thumb_up", "share"},
    {"forward", "play", "backward", "next"},
    {"forward", "play", "backward", "next"},
    {"search", "browse", "cart", "checkout"},
};

}  // namespace

std::vector<AppProfile> default_catalog(const CatalogOptions &opts) {
    auto rng = stream(opts.seed, 0xca7);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);

    // per-action shapes shared by every category; apps shift them
    const double up_rate[] = {8, 7, 6, 10, 7, 8};
    const double down_rate[] = {5, 9, 7, 6, 8, 5};
    const double down_mean[] = {300, 1350, 850, 550, 1100, 700};
    const double burst[] = {0.5, 2.0, 1.0, 3.0, 1.5, 0.8};

    std::vector<AppProfile> apps;
    for (std::size_t a = 0; a < opts.apps; ++a) {
        AppProfile app;
        std::size_t cat = a % 5;
        app.category = category_names[cat];
        app.name = "com.example." + app.category + std::to_string(a / 5);
        app.background_rate = 0.2 + 0.05 * static_cast<double>(a % 4);
        // app signature: uplink frame sizes cluster around a per-app level;
        // novel apps are upload-heavy with near-MTU uplink frames
        const bool novel = a >= opts.novel_from;
        double up_level = novel ? 1350.0 + 40.0 * static_cast<double>(a - opts.novel_from)
                                : 120.0 + 100.0 * static_cast<double>(a);
        for (std::size_t g = 0; g < opts.actions_per_app; ++g) {
            ActionProfile ac;
            std::size_t k = g % 6;
            ac.name = g < 4 ? category_actions[cat][g] : "action" + std::to_string(g);
            ac.uplink_rate = up_rate[k] * jitter(rng) * (novel ? 2.0 : 1.0);
            ac.downlink_rate = down_rate[k] * jitter(rng);
            double step = novel ? 10.0 : 15.0;
            ac.uplink_size = Gaussian{std::min(1450.0, up_level + step * static_cast<double>(g)), 18};
            ac.downlink_size = Gaussian{std::min(1450.0, down_mean[k] * jitter(rng)), 60};
            ac.duration = Gaussian{8, 2};
            ac.burstiness = burst[k];
            int width = 1080 / static_cast<int>(opts.actions_per_app);
            ac.button = Rect{static_cast<int>(g) * width, 1700, (static_cast<int>(g) + 1) * width, 1900};
            app.actions.push_back(ac);
        }
        apps.push_back(std::move(app));
    }
    return apps;
}

Scenario catalog_scenario(std::vector<AppProfile> apps, const InstancePlan &plan, std::uint64_t seed) {
    Scenario sc;
    sc.seed = seed;
    sc.apps = std::move(apps);
    sc.mgmt_fraction = 0.05;
    sc.background_pad = plan.idle_gap / 2;
    UserScript collector;
    collector.name = "collector";
    collector.mac_rotation_period = 1e9;
    double t = plan.idle_gap / 2;
    for (std::size_t i = 0; i < plan.instances_per_app; ++i) {
        for (std::size_t a = 0; a < sc.apps.size(); ++a) {
            collector.sessions.push_back(UsageSession{t, plan.instance_length, static_cast<int>(a)});
            t += plan.instance_length + plan.idle_gap;
        }
    }
    sc.horizon = t;
    sc.users.push_back(std::move(collector));
    return sc;
}

Scenario room_scenario(std::vector<AppProfile> apps, const RoomPlan &plan, MacAddress ap, std::uint64_t seed) {
    Scenario sc;
    sc.seed = seed;
    sc.ap = ap;
    sc.apps = std::move(apps);
    sc.horizon = plan.day_length * static_cast<double>(plan.days);
    sc.background_pad = 60;
    auto rng = stream(seed, 0x200);
    const std::size_t known = std::min(plan.known_apps, sc.apps.size());
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    for (std::size_t u = 0; u < plan.users; ++u) {
        UserScript user;
        user.name = "user" + std::to_string(u);
        user.mac_rotation_period = plan.day_length;
        const std::size_t primary = (plan.first_primary_app + u) % known;
        // two secondary apps distinct from the primary
        std::vector<std::size_t> others;
        for (std::size_t a = 0; a < known; ++a) {
            if (a != primary) others.push_back(a);
        }
        std::shuffle(others.begin(), others.end(), rng);
        others.resize(std::min<std::size_t>(2, others.size()));

        auto add_app = [&](std::size_t app, double mass) {
            std::vector<double> w(sc.apps[app].actions.size());
            for (auto &x : w) x = 0.2 + u01(rng);
            double s = std::accumulate(w.begin(), w.end(), 0.0);
            for (std::size_t g = 0; g < w.size(); ++g) {
                user.preferences.push_back(Preference{app, g, mass * w[g] / s});
            }
        };
        add_app(primary, others.empty() ? 1.0 : plan.primary_share);
        for (auto a : others) add_app(a, (1.0 - plan.primary_share) / static_cast<double>(others.size()));
        double total = 0;
        for (auto &p : user.preferences) total += p.weight;
        for (auto &p : user.preferences) p.weight /= total;

        // sessions spread over office hours without overlap
        for (std::size_t d = 0; d < plan.days; ++d) {
            double day0 = plan.day_length * static_cast<double>(d);
            double office_start = day0 + std::min(9 * 3600.0, plan.day_length * 0.3);
            double office_len = std::min(9 * 3600.0, plan.day_length * 0.6);
            double slot = office_len / static_cast<double>(std::max<std::size_t>(plan.sessions_per_day, 1));
            for (std::size_t s = 0; s < plan.sessions_per_day; ++s) {
                double room = std::max(0.0, slot - plan.session_length - 2 * sc.background_pad);
                double start = office_start + slot * static_cast<double>(s) + sc.background_pad + u01(rng) * room;
                user.sessions.push_back(UsageSession{start, plan.session_length, -1});
            }
        }
        sc.users.push_back(std::move(user));
    }
    return sc;
}

}  // namespace macprint
