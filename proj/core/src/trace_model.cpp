#include "macprint/trace_model.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace macprint {

ParseError::ParseError(std::string source, std::size_t line, const std::string &what)
    : Error(source + ":" + std::to_string(line) + ": " + what), source_{std::move(source)}, line_{line} {}

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::optional<MacAddress> MacAddress::try_parse(std::string_view text) {
    // accepts aa:bb:cc:dd:ee:ff and aa-bb-cc-dd-ee-ff, any case
    if (text.size() != 17) {
        return std::nullopt;
    }
    std::array<std::uint8_t, 6> bytes{};
    for (std::size_t i = 0; i < 6; ++i) {
        int hi = hex_value(text[i * 3]);
        int lo = hex_value(text[i * 3 + 1]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        if (i < 5 && text[i * 3 + 2] != ':' && text[i * 3 + 2] != '-') {
            return std::nullopt;
        }
        bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return MacAddress{bytes};
}

MacAddress MacAddress::parse(std::string_view text) {
    auto mac = try_parse(text);
    if (!mac) {
        throw Error("malformed MAC address '" + std::string(text) + "'");
    }
    return *mac;
}

MacAddress MacAddress::broadcast() {
    return MacAddress{{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}};
}

std::string MacAddress::str() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", bytes_[0], bytes_[1], bytes_[2], bytes_[3],
                  bytes_[4], bytes_[5]);
    return buf;
}

std::string_view to_string(FrameKind kind) {
    switch (kind) {
    case FrameKind::management: return "mgmt";
    case FrameKind::control: return "ctrl";
    case FrameKind::data: return "data";
    }
    return "data";
}

std::optional<FrameKind> frame_kind_from_string(std::string_view text) {
    if (text == "mgmt") return FrameKind::management;
    if (text == "ctrl") return FrameKind::control;
    if (text == "data") return FrameKind::data;
    return std::nullopt;
}

TrafficTrace::TrafficTrace(MacAddress mac, std::vector<FrameMeta> frames) : mac_{mac}, frames_{std::move(frames)} {
    if (frames_.empty()) {
        throw Error("traffic trace for " + mac_.str() + " has no frames");
    }
    for (std::size_t i = 1; i < frames_.size(); ++i) {
        if (frames_[i].t < frames_[i - 1].t) {
            throw Error("traffic trace for " + mac_.str() + " is not time ordered");
        }
    }
    duration_ = frames_.back().t - frames_.front().t;
}

double trace_duration(const TrafficTrace &trace) {
    return trace.end() - trace.start();
}

std::size_t TraceDataset::mac_count() const {
    std::set<MacAddress> macs;
    for (const auto &t : traces) {
        macs.insert(t.mac());
    }
    return macs.size();
}

std::map<MacAddress, std::vector<std::size_t>> TraceDataset::by_mac() const {
    std::map<MacAddress, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        out[traces[i].mac()].push_back(i);
    }
    return out;
}

std::vector<std::uint8_t> OneHotLabel::bits() const {
    std::vector<std::uint8_t> out(dims, 0);
    out[index] = 1;
    return out;
}

OneHotLabel onehot_encode(std::size_t index, std::size_t dims) {
    if (dims == 0 || index >= dims) {
        throw std::out_of_range("one-hot index " + std::to_string(index) + " outside [0, " + std::to_string(dims) +
                                ")");
    }
    return OneHotLabel{dims, index};
}

std::size_t onehot_decode(std::span<const std::uint8_t> bits) {
    std::optional<std::size_t> hot;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] > 1 || (bits[i] == 1 && hot)) {
            throw Error("not a one-hot vector");
        }
        if (bits[i] == 1) {
            hot = i;
        }
    }
    if (!hot) {
        throw Error("not a one-hot vector");
    }
    return *hot;
}

std::vector<std::uint8_t> OperationLabel::flatten() const {
    std::vector<std::uint8_t> out(flat_size(), 0);
    out[app.index] = 1;
    out[app.dims + action.index] = 1;
    return out;
}

OperationLabel OperationLabel::unflatten(std::span<const std::uint8_t> bits, std::size_t app_dims) {
    if (app_dims == 0 || app_dims >= bits.size()) {
        throw Error("operation label split point outside vector");
    }
    auto app = bits.first(app_dims);
    auto action = bits.subspan(app_dims);
    return OperationLabel{OneHotLabel{app.size(), onehot_decode(app)},
                          OneHotLabel{action.size(), onehot_decode(action)}};
}

void ActionMappingTable::add(const std::string &app, Rect rect, std::size_t action) {
    if (rect.empty()) {
        throw Error("empty rectangle for app " + app);
    }
    auto &list = entries_[app];
    for (const auto &e : list) {
        if (e.rect.intersects(rect)) {
            throw Error("overlapping action rectangles for app " + app);
        }
    }
    list.push_back(Entry{rect, action});
}

std::optional<std::size_t> ActionMappingTable::lookup(const std::string &app, int x, int y) const {
    auto it = entries_.find(app);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    std::optional<std::size_t> found;
    for (const auto &e : it->second) {
        if (e.rect.contains(x, y)) {
            if (found) {
                throw Error("tap at " + std::to_string(x) + "," + std::to_string(y) + " matches two rectangles of " +
                            app);
            }
            found = e.action;
        }
    }
    return found;
}

}  // namespace macprint
