#include "macprint/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace macprint {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

// shortest text that parses back to the same double
std::string fmt(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string &v) { return v; }
std::string fmt(const std::vector<std::size_t> &v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

bool parse(std::string_view s, double &v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}
bool parse(std::string_view s, std::uint64_t &v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}
bool parse(std::string_view s, bool &v) {
    if (s == "true" || s == "1" || s == "yes") {
        v = true;
    } else if (s == "false" || s == "0" || s == "no") {
        v = false;
    } else {
        return false;
    }
    return true;
}
bool parse(std::string_view s, std::string &v) {
    v = std::string(s);
    return true;
}
bool parse(std::string_view s, std::vector<std::size_t> &v) {
    v.clear();
    while (!s.empty()) {
        auto comma = s.find(',');
        auto part = trim(s.substr(0, comma));
        std::uint64_t x;
        if (!parse(part, x)) return false;
        v.push_back(x);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return true;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig &)> get;
    std::function<bool(RunConfig &, std::string_view)> set;
};

template <typename T>
Field field(std::string key, T RunConfig::*member) {
    return {std::move(key), [member](const RunConfig &c) { return fmt(c.*member); },
            [member](RunConfig &c, std::string_view s) { return parse(s, c.*member); }};
}

// nested members are reached through an accessor
template <typename Access>
Field nested(std::string key, Access access) {
    return {std::move(key), [access](const RunConfig &c) { return fmt(access(const_cast<RunConfig &>(c))); },
            [access](RunConfig &c, std::string_view s) { return parse(s, access(c)); }};
}

void add_tcn(std::vector<Field> &f, const std::string &prefix, TcnConfig ClassifierSettings::*tcn) {
    f.push_back(nested(prefix + ".channels", [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).channels; }));
    f.push_back(nested(prefix + ".kernel", [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).kernel; }));
    f.push_back(nested(prefix + ".levels", [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).levels; }));
    f.push_back(nested(prefix + ".dropout", [tcn](RunConfig &c) -> double & { return (c.classifier.*tcn).dropout; }));
    f.push_back(nested(prefix + ".attention", [tcn](RunConfig &c) -> bool & { return (c.classifier.*tcn).attention; }));
    f.push_back(nested(prefix + ".learning_rate",
                       [tcn](RunConfig &c) -> double & { return (c.classifier.*tcn).learning_rate; }));
    f.push_back(nested(prefix + ".epochs", [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).epochs; }));
    f.push_back(nested(prefix + ".batch_size",
                       [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).batch_size; }));
    f.push_back(nested(prefix + ".validation_fraction",
                       [tcn](RunConfig &c) -> double & { return (c.classifier.*tcn).validation_fraction; }));
    f.push_back(nested(prefix + ".seed", [tcn](RunConfig &c) -> std::uint64_t & { return (c.classifier.*tcn).seed; }));
}

const std::vector<Field> &fields() {
    static const std::vector<Field> table = [] {
        static_assert(sizeof(std::size_t) == sizeof(std::uint64_t));
        std::vector<Field> f;
        f.push_back(field("seed", &RunConfig::seed));
        f.push_back(field("workdir", &RunConfig::workdir));
        f.push_back(nested("segment.gamma", [](RunConfig &c) -> double & { return c.segmenter.gamma; }));
        f.push_back(nested("segment.min_trace_frames",
                           [](RunConfig &c) -> std::uint64_t & { return c.segmenter.min_trace_frames; }));
        f.push_back(nested("segment.rate_window", [](RunConfig &c) -> double & { return c.segmenter.rate_window; }));
        add_tcn(f, "app_tcn", &ClassifierSettings::app_tcn);
        add_tcn(f, "action_tcn", &ClassifierSettings::action_tcn);
        f.push_back(nested("openmax.tail_size", [](RunConfig &c) -> std::uint64_t & { return c.classifier.openmax.tail_size; }));
        f.push_back(nested("openmax.delta", [](RunConfig &c) -> double & { return c.classifier.openmax.delta; }));
        f.push_back(nested("app_window", [](RunConfig &c) -> std::uint64_t & { return c.classifier.app_window; }));
        f.push_back(nested("action_window", [](RunConfig &c) -> std::uint64_t & { return c.classifier.action_window; }));
        f.push_back(nested("actions_per_category",
                           [](RunConfig &c) -> std::uint64_t & { return c.classifier.actions_per_category; }));
        f.push_back(nested("max_app_samples", [](RunConfig &c) -> std::uint64_t & { return c.classifier.max_app_samples; }));
        f.push_back(nested("max_action_samples",
                           [](RunConfig &c) -> std::uint64_t & { return c.classifier.max_action_samples; }));
        f.push_back(field("train_fraction", &RunConfig::train_fraction));
        f.push_back(field("behavior_window", &RunConfig::behavior_window));
        f.push_back(field("k_max", &RunConfig::k_max));
        f.push_back(nested("kmeans.max_iterations", [](RunConfig &c) -> std::uint64_t & { return c.kmeans.max_iterations; }));
        f.push_back(nested("kmeans.restarts", [](RunConfig &c) -> std::uint64_t & { return c.kmeans.restarts; }));
        f.push_back(nested("kmeans.seed", [](RunConfig &c) -> std::uint64_t & { return c.kmeans.seed; }));
        f.push_back(field("refresh_window", &RunConfig::refresh_window));
        f.push_back(field("catalog_apps", &RunConfig::catalog_apps));
        f.push_back(field("known_apps", &RunConfig::known_apps));
        f.push_back(field("actions_per_app", &RunConfig::actions_per_app));
        f.push_back(field("catalog_seed", &RunConfig::catalog_seed));
        f.push_back(field("instances_per_app", &RunConfig::instances_per_app));
        f.push_back(field("instance_length", &RunConfig::instance_length));
        f.push_back(field("instance_gap", &RunConfig::instance_gap));
        f.push_back(field("rooms", &RunConfig::rooms));
        f.push_back(field("room_days", &RunConfig::room_days));
        f.push_back(field("room_train_days", &RunConfig::room_train_days));
        f.push_back(field("sessions_per_day", &RunConfig::sessions_per_day));
        f.push_back(field("session_length", &RunConfig::session_length));
        f.push_back(field("day_length", &RunConfig::day_length));
        f.push_back(field("open_world", &RunConfig::open_world));
        f.push_back(field("loss_rate", &RunConfig::loss_rate));
        f.push_back(field("workers", &RunConfig::workers));
        f.push_back(field("runtime_samples", &RunConfig::runtime_samples));
        return f;
    }();
    return table;
}

}  // namespace

void RunConfig::validate() const {
    segmenter.validate();
    classifier.validate();
    if (!(train_fraction > 0 && train_fraction < 1)) throw Error("train_fraction must be in (0, 1)");
    if (behavior_window == 0) throw Error("behavior_window must be positive");
    if (kmeans.max_iterations == 0 || kmeans.max_iterations > 100) {
        throw Error("kmeans.max_iterations must be in [1, 100]");
    }
    if (known_apps < 2 || known_apps > catalog_apps) throw Error("known_apps must be in [2, catalog_apps]");
    if (actions_per_app != classifier.actions_per_category) {
        throw Error("actions_per_app must equal actions_per_category");
    }
    if (rooms.empty()) throw Error("rooms must list at least one room size");
    for (auto r : rooms) {
        if (r == 0 || r > known_apps) throw Error("room sizes must be in [1, known_apps]");
    }
    if (room_train_days == 0 || room_train_days >= room_days) throw Error("room_train_days must be in [1, room_days)");
    if (!(loss_rate >= 0 && loss_rate < 1)) throw Error("loss_rate must be in [0, 1)");
    if (!(instance_length > 0) || !(session_length > 0) || !(day_length > 0)) {
        throw Error("lengths must be positive");
    }
}

RunConfig parse_run_config(std::istream &in, const std::string &source) {
    std::map<std::string_view, const Field *> by_key;
    for (const auto &f : fields()) by_key[f.key] = &f;
    RunConfig cfg;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto line = trim(raw);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ParseError(source, lineno, "unknown key '" + std::string(key) + "'");
        if (!it->second->set(cfg, value)) {
            throw ParseError(source, lineno, "bad value '" + std::string(value) + "' for " + std::string(key));
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    return parse_run_config(in, path.string());
}

void dump_run_config(std::ostream &out, const RunConfig &cfg) {
    for (const auto &f : fields()) out << f.key << " = " << f.get(cfg) << '\n';
}

std::string dump_run_config(const RunConfig &cfg) {
    std::ostringstream out;
    dump_run_config(out, cfg);
    return out.str();
}

std::string config_hash(const RunConfig &cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump_run_config(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace macprint
