// Scenario text format:
//
//   [scenario]
//   seed = 7
//   horizon_s = 600
//   ap_mac = 02:00:00:00:00:01
//   ...
//   [app com.example.messaging0]
//   category = messaging
//   background_rate = 0.3
//   # name up_rate down_rate up_mean up_sd down_mean down_sd dur_mean dur_sd burstiness x0 y0 x1 y1
//   action = text 6 4 120 18 300 60 8 2 0.5 0 1700 270 1900
//   [user alice]
//   mac_rotation_s = 86400
//   pref = com.example.messaging0 text 0.25
//   session = 30 120 [app]
//
// Apps must be declared before users that reference them.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "macprint/ingest.hpp"
#include "macprint/synthgen.hpp"

namespace macprint {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string &s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

double to_double(const std::string &s, const std::string &src, std::size_t line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception &) {
        throw ParseError(src, line, "expected a number, got '" + s + "'");
    }
}

std::uint64_t to_u64(const std::string &s, const std::string &src, std::size_t line) {
    try {
        std::size_t pos = 0;
        auto v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception &) {
        throw ParseError(src, line, "expected an unsigned integer, got '" + s + "'");
    }
}

}  // namespace

Scenario parse_scenario(std::istream &in, const std::string &source) {
    Scenario sc;
    sc.apps.clear();
    enum class Section { none, scenario, app, user } section = Section::none;
    std::map<std::string, std::size_t> app_index;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(source, lineno, "unterminated section header");
            auto head = words(line.substr(1, line.size() - 2));
            if (head.size() == 1 && head[0] == "scenario") {
                section = Section::scenario;
            } else if (head.size() == 2 && head[0] == "app") {
                if (app_index.count(head[1])) throw ParseError(source, lineno, "duplicate app " + head[1]);
                app_index[head[1]] = sc.apps.size();
                sc.apps.push_back(AppProfile{head[1], "", 0.3, {}});
                section = Section::app;
            } else if (head.size() == 2 && head[0] == "user") {
                sc.users.push_back(UserScript{head[1], {}, {}, 86400.0});
                section = Section::user;
            } else {
                throw ParseError(source, lineno, "unknown section '" + line + "'");
            }
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto num = [&](const std::string &s) { return to_double(s, source, lineno); };

        switch (section) {
        case Section::none:
            throw ParseError(source, lineno, "key outside of any section");
        case Section::scenario:
            if (key == "seed") sc.seed = to_u64(value, source, lineno);
            else if (key == "horizon_s") sc.horizon = num(value);
            else if (key == "ap_mac") {
                auto mac = MacAddress::try_parse(value);
                if (!mac) throw ParseError(source, lineno, "bad MAC address");
                sc.ap = *mac;
            } else if (key == "mgmt_fraction") sc.mgmt_fraction = num(value);
            else if (key == "ctrl_fraction") sc.ctrl_fraction = num(value);
            else if (key == "foreign_fraction") sc.foreign_fraction = num(value);
            else if (key == "tap_interval_s") sc.tap_interval = num(value);
            else if (key == "background_pad_s") sc.background_pad = num(value);
            else if (key == "min_action_duration_s") sc.min_action_duration = num(value);
            else throw ParseError(source, lineno, "unknown scenario key '" + key + "'");
            break;
        case Section::app: {
            auto &app = sc.apps.back();
            if (key == "category") app.category = value;
            else if (key == "background_rate") app.background_rate = num(value);
            else if (key == "action") {
                auto w = words(value);
                if (w.size() != 14) throw ParseError(source, lineno, "action needs 14 fields");
                ActionProfile a;
                a.name = w[0];
                a.uplink_rate = num(w[1]);
                a.downlink_rate = num(w[2]);
                a.uplink_size = Gaussian{num(w[3]), num(w[4])};
                a.downlink_size = Gaussian{num(w[5]), num(w[6])};
                a.duration = Gaussian{num(w[7]), num(w[8])};
                a.burstiness = num(w[9]);
                a.button = Rect{static_cast<int>(num(w[10])), static_cast<int>(num(w[11])),
                                static_cast<int>(num(w[12])), static_cast<int>(num(w[13]))};
                app.actions.push_back(a);
            } else throw ParseError(source, lineno, "unknown app key '" + key + "'");
            break;
        }
        case Section::user: {
            auto &user = sc.users.back();
            if (key == "mac_rotation_s") user.mac_rotation_period = num(value);
            else if (key == "pref") {
                auto w = words(value);
                if (w.size() != 3) throw ParseError(source, lineno, "pref needs app, action and weight");
                auto it = app_index.find(w[0]);
                if (it == app_index.end()) throw ParseError(source, lineno, "unknown app " + w[0]);
                const auto &acts = sc.apps[it->second].actions;
                std::size_t g = 0;
                while (g < acts.size() && acts[g].name != w[1]) ++g;
                if (g == acts.size()) throw ParseError(source, lineno, "unknown action " + w[1]);
                user.preferences.push_back(Preference{it->second, g, num(w[2])});
            } else if (key == "session") {
                auto w = words(value);
                if (w.size() != 2 && w.size() != 3) throw ParseError(source, lineno, "session needs start and length");
                UsageSession s{num(w[0]), num(w[1]), -1};
                if (w.size() == 3) {
                    auto it = app_index.find(w[2]);
                    if (it == app_index.end()) throw ParseError(source, lineno, "unknown app " + w[2]);
                    s.app = static_cast<int>(it->second);
                }
                user.sessions.push_back(s);
            } else throw ParseError(source, lineno, "unknown user key '" + key + "'");
            break;
        }
        }
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario " + path.string());
    return parse_scenario(in, path.string());
}

void write_scenario(std::ostream &out, const Scenario &sc) {
    out << "[scenario]\n"
        << "seed = " << sc.seed << '\n'
        << "horizon_s = " << fmt(sc.horizon) << '\n'
        << "ap_mac = " << sc.ap.str() << '\n'
        << "mgmt_fraction = " << fmt(sc.mgmt_fraction) << '\n'
        << "ctrl_fraction = " << fmt(sc.ctrl_fraction) << '\n'
        << "foreign_fraction = " << fmt(sc.foreign_fraction) << '\n'
        << "tap_interval_s = " << fmt(sc.tap_interval) << '\n'
        << "background_pad_s = " << fmt(sc.background_pad) << '\n'
        << "min_action_duration_s = " << fmt(sc.min_action_duration) << '\n';
    for (const auto &app : sc.apps) {
        out << "\n[app " << app.name << "]\n"
            << "category = " << app.category << '\n'
            << "background_rate = " << fmt(app.background_rate) << '\n'
            << "# name up_rate down_rate up_mean up_sd down_mean down_sd dur_mean dur_sd burstiness x0 y0 x1 y1\n";
        for (const auto &a : app.actions) {
            out << "action = " << a.name << ' ' << fmt(a.uplink_rate) << ' ' << fmt(a.downlink_rate) << ' '
                << fmt(a.uplink_size.mean) << ' ' << fmt(a.uplink_size.stddev) << ' ' << fmt(a.downlink_size.mean)
                << ' ' << fmt(a.downlink_size.stddev) << ' ' << fmt(a.duration.mean) << ' '
                << fmt(a.duration.stddev) << ' ' << fmt(a.burstiness) << ' ' << a.button.x0 << ' ' << a.button.y0
                << ' ' << a.button.x1 << ' ' << a.button.y1 << '\n';
        }
    }
    for (const auto &u : sc.users) {
        out << "\n[user " << u.name << "]\n"
            << "mac_rotation_s = " << fmt(u.mac_rotation_period) << '\n';
        for (const auto &p : u.preferences) {
            out << "pref = " << sc.apps[p.app].name << ' ' << sc.apps[p.app].actions[p.action].name << ' '
                << fmt(p.weight) << '\n';
        }
        for (const auto &s : u.sessions) {
            out << "session = " << fmt(s.start) << ' ' << fmt(s.length);
            if (s.app >= 0) out << ' ' << sc.apps[static_cast<std::size_t>(s.app)].name;
            out << '\n';
        }
    }
}

void write_interaction_log(std::ostream &out, std::span<const InteractionRecord> records) {
    char buf[48];
    for (const auto &r : records) {
        std::snprintf(buf, sizeof buf, "%.6f", r.t);
        out << buf << '|' << r.app_name << '|' << r.x << ',' << r.y << '\n';
    }
}

void write_ground_truth(std::ostream &out, const GroundTruth &truth, std::span<const FrameMeta> capture) {
    using nlohmann::json;
    for (std::size_t i = 0; i < truth.frames.size(); ++i) {
        const auto &f = truth.frames[i];
        json j{{"kind", "frame"}, {"row", i},        {"t", i < capture.size() ? capture[i].t : 0.0},
               {"user", f.user},  {"app", f.app},    {"action", f.action},
               {"session", f.session}};
        out << j.dump() << '\n';
    }
    for (const auto &s : truth.sessions) {
        json j{{"kind", "session"}, {"id", s.id},       {"user", s.user}, {"app", s.app},
               {"action", s.action}, {"start", s.start}, {"end", s.end},   {"taps", s.taps}};
        out << j.dump() << '\n';
    }
    for (const auto &p : truth.pseudonyms) {
        json j{{"kind", "pseudonym"}, {"mac", p.mac.str()}, {"user", p.user}, {"from", p.from}, {"to", p.to}};
        out << j.dump() << '\n';
    }
    json summary{{"kind", "summary"}, {"frames", truth.frames.size()}, {"taps", truth.tap_count}};
    out << summary.dump() << '\n';
}

GroundTruth read_ground_truth(std::istream &in) {
    using nlohmann::json;
    GroundTruth truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
            auto kind = j.at("kind").get<std::string>();
            if (kind == "frame") {
                auto row = j.at("row").get<std::size_t>();
                if (row != truth.frames.size()) throw ParseError("<truth>", lineno, "frame rows out of order");
                truth.frames.push_back(FrameTruth{j.at("user").get<int>(), j.at("app").get<int>(),
                                                  j.at("action").get<int>(), j.at("session").get<int>()});
            } else if (kind == "session") {
                truth.sessions.push_back(SessionTruth{j.at("id").get<int>(), j.at("user").get<int>(),
                                                      j.at("app").get<int>(), j.at("action").get<int>(),
                                                      j.at("start").get<double>(), j.at("end").get<double>(),
                                                      j.at("taps").get<std::size_t>()});
            } else if (kind == "pseudonym") {
                truth.pseudonyms.push_back(PseudonymTruth{MacAddress::parse(j.at("mac").get<std::string>()),
                                                          j.at("user").get<int>(), j.at("from").get<double>(),
                                                          j.at("to").get<double>()});
            } else if (kind == "summary") {
                truth.tap_count = j.at("taps").get<std::size_t>();
            }
        } catch (const json::exception &e) {
            throw ParseError("<truth>", lineno, e.what());
        }
    }
    return truth;
}

DeviceRegistry device_registry(const Scenario &scenario, const GroundTruth &truth) {
    DeviceRegistry reg;
    for (const auto &u : scenario.users) reg.users.push_back(u.name);
    for (const auto &p : truth.pseudonyms) {
        reg.entries.emplace_back(p.mac, static_cast<std::size_t>(p.user));
    }
    return reg;
}

void write_device_registry(std::ostream &out, const DeviceRegistry &registry) {
    out << "# mac user\n";
    for (const auto &[mac, user] : registry.entries) {
        out << mac.str() << ' ' << registry.users.at(user) << '\n';
    }
}

DeviceRegistry read_device_registry(std::istream &in, const std::string &source) {
    DeviceRegistry reg;
    std::map<std::string, std::size_t> index;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto w = words(line);
        if (w.size() != 2) throw ParseError(source, lineno, "expected '<mac> <user>'");
        auto mac = MacAddress::try_parse(w[0]);
        if (!mac) throw ParseError(source, lineno, "bad MAC address");
        auto [it, fresh] = index.try_emplace(w[1], reg.users.size());
        if (fresh) reg.users.push_back(w[1]);
        reg.entries.emplace_back(*mac, it->second);
    }
    return reg;
}

void write_generated(const std::filesystem::path &dir, const Scenario &scenario, const GeneratedScenario &gen) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "logs");
    auto open = [](const fs::path &p) {
        std::ofstream out(p);
        if (!out) throw Error("cannot write " + p.string());
        return out;
    };
    {
        auto out = open(dir / "scenario.txt");
        write_scenario(out, scenario);
    }
    write_capture(dir / "capture.csv", gen.capture);
    for (std::size_t u = 0; u < scenario.users.size(); ++u) {
        auto out = open(dir / "logs" / (scenario.users[u].name + ".log"));
        write_interaction_log(out, gen.logs[u]);
    }
    {
        auto out = open(dir / "devices.txt");
        write_device_registry(out, device_registry(scenario, gen.truth));
    }
    {
        auto out = open(dir / "truth.jsonl");
        write_ground_truth(out, gen.truth, gen.capture);
    }
}

}  // namespace macprint
