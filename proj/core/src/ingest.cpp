#include "macprint/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace macprint {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

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

std::vector<FrameMeta> parse_capture(std::istream &in, const std::string &source) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(source, 1, "missing header");
    }
    ++lineno;
    if (trim(line) != capture_header) {
        throw ParseError(source, lineno, "expected header '" + std::string(capture_header) + "'");
    }
    std::vector<FrameMeta> frames;
    while (std::getline(in, line)) {
        ++lineno;
        auto row = trim(line);
        if (row.empty()) {
            continue;
        }
        auto fields = split(row, ',');
        if (fields.size() != 5) {
            throw ParseError(source, lineno, "expected 5 fields, got " + std::to_string(fields.size()));
        }
        FrameMeta f;
        if (!parse_number(fields[0], f.t) || !std::isfinite(f.t) || f.t < 0) {
            throw ParseError(source, lineno, "bad time '" + std::string(fields[0]) + "'");
        }
        auto src = MacAddress::try_parse(fields[1]);
        auto dst = MacAddress::try_parse(fields[2]);
        if (!src || !dst) {
            throw ParseError(source, lineno, "bad MAC address");
        }
        f.src = *src;
        f.dst = *dst;
        std::int64_t size = 0;
        if (!parse_number(fields[3], size) || size < 1 || size > 65535) {
            throw ParseError(source, lineno, "bad frame size '" + std::string(fields[3]) + "'");
        }
        f.size = static_cast<std::uint32_t>(size);
        auto kind = frame_kind_from_string(fields[4]);
        if (!kind) {
            throw ParseError(source, lineno, "bad frame kind '" + std::string(fields[4]) + "'");
        }
        f.kind = *kind;
        f.id = static_cast<std::uint32_t>(frames.size());
        frames.push_back(f);
    }
    return frames;
}

std::vector<FrameMeta> parse_capture(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open capture " + path.string());
    }
    return parse_capture(in, path.string());
}

void write_capture(std::ostream &out, std::span<const FrameMeta> frames) {
    out << capture_header << '\n';
    char buf[96];
    for (const auto &f : frames) {
        auto src = f.src.str();
        auto dst = f.dst.str();
        std::snprintf(buf, sizeof buf, "%.6f,%s,%s,%u,", f.t, src.c_str(), dst.c_str(), f.size);
        out << buf << to_string(f.kind) << '\n';
    }
}

void write_capture(const std::filesystem::path &path, std::span<const FrameMeta> frames) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write capture " + path.string());
    }
    write_capture(out, frames);
}

std::vector<FrameMeta> filter_data_frames(std::span<const FrameMeta> frames, const MacAddress &ap,
                                          FilterReport *report) {
    FilterReport r;
    std::vector<FrameMeta> out;
    out.reserve(frames.size());
    for (const auto &f : frames) {
        if (f.kind != FrameKind::data) {
            ++r.non_data;
            continue;
        }
        if (f.dst == ap) {
            out.push_back(f);
            out.back().dir = Direction::uplink;
        } else if (f.src == ap) {
            out.push_back(f);
            out.back().dir = Direction::downlink;
        } else {
            ++r.foreign;
        }
    }
    r.kept = out.size();
    if (report) {
        *report = r;
    }
    return out;
}

void SegmenterConfig::validate() const {
    if (!(gamma > 0)) throw Error("segmenter gamma must be positive");
    if (min_trace_frames < 1) throw Error("segmenter min_trace_frames must be at least 1");
    if (!(rate_window > 0)) throw Error("segmenter rate_window must be positive");
}

namespace {

void segment_device(const MacAddress &mac, const std::vector<FrameMeta> &frames, const SegmenterConfig &cfg,
                    std::vector<TrafficTrace> &out) {
    const std::size_t n = frames.size();
    const double w = cfg.rate_window;
    // count > gamma·w  ⇔  count ≥ threshold + 1
    const auto threshold = static_cast<std::size_t>(std::floor(cfg.gamma * w));

    std::vector<std::size_t> window_start(n);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (frames[lo].t <= frames[i].t - w) ++lo;
        window_start[i] = lo;
    }

    auto emit = [&](std::size_t first, std::size_t last) {
        if (last - first + 1 < cfg.min_trace_frames) return;
        out.emplace_back(mac, std::vector<FrameMeta>(frames.begin() + static_cast<std::ptrdiff_t>(first),
                                                     frames.begin() + static_cast<std::ptrdiff_t>(last) + 1));
    };

    bool open = false;
    std::size_t first = 0, last_active = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t count = i - window_start[i] + 1;
        if (count <= threshold) continue;
        if (open) {
            // the windowed count at last_active falls to the threshold once
            // frame (last_active - threshold) leaves the window
            double quiet_from = frames[last_active - threshold].t + w;
            if (frames[i].t - quiet_from >= w) {
                emit(first, last_active);
                open = false;
            }
        }
        if (!open) {
            first = window_start[i];
            open = true;
        }
        last_active = i;
    }
    if (open) emit(first, last_active);
}

}  // namespace

TraceDataset segment_traces(std::span<const FrameMeta> frames, const SegmenterConfig &cfg) {
    cfg.validate();
    std::map<MacAddress, std::vector<FrameMeta>> per_device;
    for (const auto &f : frames) {
        per_device[device_of(f)].push_back(f);
    }
    TraceDataset ds;
    for (auto &[mac, list] : per_device) {
        std::stable_sort(list.begin(), list.end(), [](const FrameMeta &a, const FrameMeta &b) { return a.t < b.t; });
        segment_device(mac, list, cfg, ds.traces);
    }
    return ds;
}

}  // namespace macprint
