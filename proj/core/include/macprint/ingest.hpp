// ingest.hpp
//
// Capture CSV reading/writing, data-frame filtering and rate-threshold
// segmentation of foreground traffic traces.
//
// Capture CSV schema (header required):
//
//   t_rel_s,src_mac,dst_mac,size_bytes,kind
//
// with kind one of mgmt, ctrl, data and times in decimal seconds.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "macprint/trace_model.hpp"

namespace macprint {

inline constexpr std::string_view capture_header = "t_rel_s,src_mac,dst_mac,size_bytes,kind";

std::vector<FrameMeta> parse_capture(const std::filesystem::path &path);
std::vector<FrameMeta> parse_capture(std::istream &in, const std::string &source = "<capture>");

/// writes frames in file order; times with microsecond resolution
void write_capture(std::ostream &out, std::span<const FrameMeta> frames);
void write_capture(const std::filesystem::path &path, std::span<const FrameMeta> frames);

struct FilterReport {
    std::size_t kept = 0;
    std::size_t non_data = 0;
    std::size_t foreign = 0;  ///< data frames not to or from the AP
};

/// keeps data frames exchanged with `ap` and tags their direction
std::vector<FrameMeta> filter_data_frames(std::span<const FrameMeta> frames, const MacAddress &ap,
                                          FilterReport *report = nullptr);

struct SegmenterConfig {
    double gamma = 3.0;                 ///< frames per second
    std::size_t min_trace_frames = 31;
    double rate_window = 1.0;           ///< seconds

    void validate() const;
    bool operator==(const SegmenterConfig &) const = default;
};

/// Splits direction-tagged data frames into per-device traffic traces.
///
/// The rate at a frame is the number of frames of the same device in the
/// trailing window (t - rate_window, t].  A frame is active when that rate
/// exceeds gamma.  A trace begins with the first frame inside the window of
/// an active frame and ends at the last active frame before the windowed
/// count stays at or below gamma·rate_window for a full rate_window.
/// Traces shorter than min_trace_frames are dropped.  Output is ordered by
/// device then start time.
///
TraceDataset segment_traces(std::span<const FrameMeta> frames, const SegmenterConfig &cfg = {});

}  // namespace macprint
