// trace_model.hpp
//
// Domain types shared by every stage of the pipeline: frame metadata,
// segmented traffic traces, one-hot labels, interaction-log records and
// the per-app screen-location → action mapping table.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace macprint {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// a parse failure that knows where in its source it happened
///
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, const std::string &what);

    const std::string &source() const { return source_; }
    std::size_t line() const { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

/// 48-bit IEEE 802 address.  Textual form is always lowercase,
/// colon separated; ordering and equality are byte-exact.
///
class MacAddress {
public:
    constexpr MacAddress() = default;
    explicit constexpr MacAddress(std::array<std::uint8_t, 6> bytes) : bytes_{bytes} {}

    static MacAddress parse(std::string_view text);
    static std::optional<MacAddress> try_parse(std::string_view text);
    static MacAddress broadcast();

    std::string str() const;
    const std::array<std::uint8_t, 6> &bytes() const { return bytes_; }

    auto operator<=>(const MacAddress &) const = default;

private:
    std::array<std::uint8_t, 6> bytes_{};
};

enum class FrameKind : std::uint8_t { management, control, data };

enum class Direction : std::int8_t { downlink = -1, uplink = 1 };

std::string_view to_string(FrameKind kind);
std::optional<FrameKind> frame_kind_from_string(std::string_view text);

inline int sign(Direction d) { return static_cast<int>(d); }

/// plaintext header metadata of one captured frame
///
struct FrameMeta {
    double t = 0.0;                    ///< seconds since capture start
    std::uint32_t size = 1;            ///< bytes
    Direction dir = Direction::uplink; ///< relative to the monitored AP
    MacAddress src;
    MacAddress dst;
    FrameKind kind = FrameKind::data;
    std::uint32_t id = 0;              ///< row index in the source capture

    bool operator==(const FrameMeta &) const = default;
};

/// the non-AP endpoint of a direction-tagged data frame
inline const MacAddress &device_of(const FrameMeta &f) {
    return f.dir == Direction::uplink ? f.src : f.dst;
}

/// A time-ordered run of data frames exchanged by one device.
/// Immutable once built.
///
class TrafficTrace {
public:
    TrafficTrace(MacAddress mac, std::vector<FrameMeta> frames);

    const MacAddress &mac() const { return mac_; }
    std::span<const FrameMeta> frames() const { return frames_; }
    std::size_t size() const { return frames_.size(); }
    double start() const { return frames_.front().t; }
    double end() const { return frames_.back().t; }
    double duration() const { return duration_; }

private:
    MacAddress mac_;
    std::vector<FrameMeta> frames_;
    double duration_;
};

double trace_duration(const TrafficTrace &trace);

struct TraceDataset {
    std::vector<TrafficTrace> traces;

    std::size_t trace_count() const { return traces.size(); }
    std::size_t mac_count() const;
    std::map<MacAddress, std::vector<std::size_t>> by_mac() const;
};

struct OneHotLabel {
    std::size_t dims = 1;
    std::size_t index = 0;

    bool is_last() const { return index + 1 == dims; }
    std::vector<std::uint8_t> bits() const;

    bool operator==(const OneHotLabel &) const = default;
};

OneHotLabel onehot_encode(std::size_t index, std::size_t dims);
std::size_t onehot_decode(std::span<const std::uint8_t> bits);

/// app and action prediction of one burst; the last slot of each
/// one-hot is the unknown class
///
struct OperationLabel {
    OneHotLabel app;
    OneHotLabel action;

    std::size_t flat_size() const { return app.dims + action.dims; }
    std::vector<std::uint8_t> flatten() const;
    static OperationLabel unflatten(std::span<const std::uint8_t> bits, std::size_t app_dims);

    bool operator==(const OperationLabel &) const = default;
};

struct InteractionRecord {
    double t = 0.0;
    std::string app_name;
    int x = 0;
    int y = 0;

    bool operator==(const InteractionRecord &) const = default;
};

/// half-open screen rectangle [x0, x1) × [y0, y1)
struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool intersects(const Rect &o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool operator==(const Rect &) const = default;
};

class ActionMappingTable {
public:
    struct Entry {
        Rect rect;
        std::size_t action = 0;
        bool operator==(const Entry &) const = default;
    };

    /// throws Error if the rectangle overlaps one already registered
    /// for the same app
    void add(const std::string &app, Rect rect, std::size_t action);

    bool has_app(const std::string &app) const { return entries_.count(app) != 0; }
    std::optional<std::size_t> lookup(const std::string &app, int x, int y) const;
    const std::map<std::string, std::vector<Entry>> &entries() const { return entries_; }

    bool operator==(const ActionMappingTable &) const = default;

private:
    std::map<std::string, std::vector<Entry>> entries_;
};

}  // namespace macprint
