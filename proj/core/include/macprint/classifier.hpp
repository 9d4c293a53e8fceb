// classifier.hpp
//
// The app classifier, one action classifier per app category, their
// OpenMax calibrations, and the per-burst operation labels built from
// them.  Predicted labels use -1 for the unknown class.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macprint/annotate.hpp"
#include "macprint/featex.hpp"
#include "macprint/openmax.hpp"
#include "macprint/tcn.hpp"
#include "macprint/trace_model.hpp"

namespace macprint {

struct ClassifierSettings {
    TcnConfig app_tcn;
    TcnConfig action_tcn;
    OpenMaxConfig openmax;
    std::size_t app_window = 31;            ///< odd, frames
    std::size_t action_window = 5;          ///< odd, bursts
    std::size_t actions_per_category = 4;   ///< G
    std::size_t max_app_samples = 8000;     ///< training frames are strided down to this
    std::size_t max_action_samples = 20000;

    void validate() const;
    bool operator==(const ClassifierSettings &) const = default;
};

struct ActionClassifier {
    std::string category;
    TcnModel model;
    OpenMaxModel openmax;
    FeatureScaler scaler;
};

struct ClassifierBundle {
    std::vector<std::string> apps;             ///< known apps, index = class
    std::vector<std::string> categories;
    std::vector<std::size_t> app_category;     ///< per known app
    std::size_t app_window = 31;
    std::size_t action_window = 5;
    std::size_t actions_per_category = 4;
    std::optional<TcnModel> app_model;
    OpenMaxModel app_openmax;
    std::vector<std::optional<ActionClassifier>> actions;  ///< per category; empty without training data

    std::size_t app_count() const { return apps.size(); }
    /// throws Error when the routing table or model shapes are inconsistent
    void validate() const;
};

enum class OpenSetMode { openmax, softmax };

struct TrainingLog {
    TrainReport app;
    std::size_t app_samples = 0;
    std::size_t app_stride = 1;
    std::vector<TrainReport> actions;          ///< per category (empty report when untrained)
    std::vector<std::size_t> action_samples;
};

/// `app_categories[i]` is the category of `apps[i]`; frames labelled with an
/// app outside `apps` and bursts without an action label are not used
ClassifierBundle train_bundle(std::span<const AnnotatedTrace> traces, std::span<const std::string> apps,
                              std::span<const std::string> app_categories, const ClassifierSettings &settings,
                              TrainingLog *log = nullptr);

/// most frequent label, ties to the one seen first; -1 for an empty span
int majority_label(std::span<const int> labels);

struct TracePrediction {
    std::vector<int> frame_apps;     ///< per frame
    std::vector<int> burst_apps;     ///< per burst, majority of frame_apps
    std::vector<int> burst_actions;  ///< per burst, within the routed category
};

TracePrediction predict_trace(const TrafficTrace &trace, const ClassifierBundle &bundle,
                              OpenSetMode mode = OpenSetMode::openmax);

std::vector<int> predict_frame_apps(const TrafficTrace &trace, const ClassifierBundle &bundle,
                                    OpenSetMode mode = OpenSetMode::openmax);

/// per-burst actions given per-burst apps; an unknown app gives an unknown
/// action without running a classifier
std::vector<int> predict_burst_actions(const TrafficTrace &trace, std::span<const int> burst_apps,
                                       const ClassifierBundle &bundle, OpenSetMode mode = OpenSetMode::openmax);

/// one operation label per burst; app dims H+1, action dims G+1
std::vector<OperationLabel> operation_labels(const TracePrediction &prediction, const ClassifierBundle &bundle);
std::vector<OperationLabel> assemble_operation_sequence(const TrafficTrace &trace, const ClassifierBundle &bundle,
                                                        OpenSetMode mode = OpenSetMode::openmax);

// bundle_io.cpp

inline constexpr std::uint32_t bundle_format_version = 1;

void write_bundle(std::ostream &out, const ClassifierBundle &bundle);
void write_bundle(const std::filesystem::path &path, const ClassifierBundle &bundle);
/// throws Error on a bad magic, unsupported version or checksum mismatch
ClassifierBundle read_bundle(std::istream &in);
ClassifierBundle read_bundle(const std::filesystem::path &path);

}  // namespace macprint
