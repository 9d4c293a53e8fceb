#include "macprint/annotate.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "macprint/featex.hpp"

namespace macprint {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T &out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

InteractionLog parse_interaction_log(std::istream &in, const std::string &source) {
    InteractionLog log;
    std::string raw;
    std::size_t lineno = 0;
    bool ordered = true;
    while (std::getline(in, raw)) {
        ++lineno;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto p1 = line.find('|');
        auto p2 = p1 == std::string_view::npos ? p1 : line.find('|', p1 + 1);
        if (p2 == std::string_view::npos || line.find('|', p2 + 1) != std::string_view::npos) {
            throw ParseError(source, lineno, "expected t|package|x,y");
        }
        InteractionRecord r;
        if (!parse_number(line.substr(0, p1), r.t) || !(r.t >= 0)) {
            throw ParseError(source, lineno, "bad tap time");
        }
        r.app_name = std::string(line.substr(p1 + 1, p2 - p1 - 1));
        if (r.app_name.empty()) throw ParseError(source, lineno, "empty package name");
        auto loc = line.substr(p2 + 1);
        auto comma = loc.find(',');
        if (comma == std::string_view::npos || !parse_number(loc.substr(0, comma), r.x) ||
            !parse_number(loc.substr(comma + 1), r.y)) {
            throw ParseError(source, lineno, "bad tap location");
        }
        if (!log.records.empty() && r.t < log.records.back().t) ordered = false;
        log.records.push_back(std::move(r));
    }
    if (!ordered) {
        std::stable_sort(log.records.begin(), log.records.end(),
                         [](const InteractionRecord &a, const InteractionRecord &b) { return a.t < b.t; });
        log.warnings.push_back(source + ": records were out of time order and have been re-sorted");
    }
    return log;
}

InteractionLog parse_interaction_log(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open interaction log " + path.string());
    return parse_interaction_log(in, path.string());
}

std::vector<int> label_frames_by_app(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                                     std::span<const std::string> apps) {
    // foreground intervals start at records whose app differs from the previous one
    std::vector<double> change_at;
    std::vector<int> change_app;
    for (std::size_t r = 0; r < log.size(); ++r) {
        if (r > 0 && log[r].app_name == log[r - 1].app_name) continue;
        auto it = std::find(apps.begin(), apps.end(), log[r].app_name);
        change_at.push_back(log[r].t);
        change_app.push_back(it == apps.end() ? unknown_label : static_cast<int>(it - apps.begin()));
    }
    std::vector<int> labels;
    labels.reserve(trace.size());
    for (const auto &f : trace.frames()) {
        auto it = std::upper_bound(change_at.begin(), change_at.end(), f.t);
        labels.push_back(it == change_at.begin() ? unknown_label : change_app[static_cast<std::size_t>(it - change_at.begin()) - 1]);
    }
    return labels;
}

std::vector<int> label_bursts_by_action(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                                        const ActionMappingTable &table) {
    const std::size_t n = burst_count(trace);
    std::vector<int> labels(n, unknown_label);
    const double t0 = trace.start();
    auto first = std::lower_bound(log.begin(), log.end(), t0,
                                  [](const InteractionRecord &r, double t) { return r.t < t; });
    for (auto it = first; it != log.end(); ++it) {
        const double offset = it->t - t0;
        if (offset >= static_cast<double>(n)) break;
        auto action = table.lookup(it->app_name, it->x, it->y);
        if (!action) continue;
        // records are time ordered, so a later tap overwrites an earlier one
        labels[static_cast<std::size_t>(offset)] = static_cast<int>(*action);
    }
    return labels;
}

AnnotatedTrace annotate_trace(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                              const ActionMappingTable &table, std::span<const std::string> apps) {
    return AnnotatedTrace{&trace, label_frames_by_app(trace, log, apps), label_bursts_by_action(trace, log, table)};
}

}  // namespace macprint
