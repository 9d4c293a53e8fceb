// annotate.hpp
//
// Aligns label-recorder interaction logs with traffic traces.  Frame app
// labels come from the foreground-app intervals of the log; burst action
// labels come from taps that land on a known button during the burst.
//
// Log format, one record per line:
//
//   t_rel_s|package_name|x,y

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macprint/trace_model.hpp"

namespace macprint {

inline constexpr int unknown_label = -1;

struct InteractionLog {
    std::vector<InteractionRecord> records;  ///< sorted by time
    std::vector<std::string> warnings;
};

InteractionLog parse_interaction_log(std::istream &in, const std::string &source = "<log>");
InteractionLog parse_interaction_log(const std::filesystem::path &path);

/// app index (into `apps`) of the foreground interval containing each
/// frame, or unknown_label.  Intervals are [t_r, t_next_change) and the
/// last one stays open.
std::vector<int> label_frames_by_app(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                                     std::span<const std::string> apps);

/// action of the latest tap on a mapped button inside each one-second
/// burst, or unknown_label when no such tap exists
std::vector<int> label_bursts_by_action(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                                        const ActionMappingTable &table);

struct AnnotatedTrace {
    const TrafficTrace *trace = nullptr;
    std::vector<int> frame_app_labels;
    std::vector<int> burst_action_labels;
};

AnnotatedTrace annotate_trace(const TrafficTrace &trace, std::span<const InteractionRecord> log,
                              const ActionMappingTable &table, std::span<const std::string> apps);

}  // namespace macprint
