// pipeline.hpp
//
// End-to-end orchestration shared by the command-line tool, the acceptance
// tests and the benchmarks: data preparation, classifier training,
// closed/open-world evaluation, profiling, identification and runtime
// measurement.
//
// Inference only ever sees what a passive observer has (capture rows and the
// trained bundle).  GroundTruth enters only in the score_* functions, after
// all predictions are made.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "macprint/annotate.hpp"
#include "macprint/classifier.hpp"
#include "macprint/ingest.hpp"
#include "macprint/metrics.hpp"
#include "macprint/profiler.hpp"
#include "macprint/run_config.hpp"
#include "macprint/synthgen.hpp"

namespace macprint {

/// runs fn(0..n-1) on up to `workers` threads (0 = hardware concurrency)
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &fn);

/// what a controlled collection yields: capture, per-user interaction logs
/// and the MAC → user registry, plus the app catalog with its button map
struct CollectedData {
    Scenario scenario;
    std::vector<FrameMeta> capture;
    std::vector<std::vector<InteractionRecord>> logs;  ///< parallel to registry.users
    DeviceRegistry registry;
};

CollectedData collected_from(const Scenario &scenario, const GeneratedScenario &gen);

/// reads scenario.txt, capture.csv, devices.txt and logs/<user>.log
CollectedData load_collected(const std::filesystem::path &dir);

Scenario catalog_of(const RunConfig &cfg);
std::vector<Scenario> rooms_of(const RunConfig &cfg);

/// known apps are the first cfg.known_apps catalog entries
std::vector<std::string> known_app_names(const Scenario &scenario, std::size_t known);
std::vector<std::string> known_app_categories(const Scenario &scenario, std::size_t known);

TraceDataset build_traces(std::span<const FrameMeta> capture, const MacAddress &ap, const SegmenterConfig &cfg,
                          FilterReport *report = nullptr);

/// app labels are indices into scenario.app_names(); traces of devices
/// missing from the registry get all-unknown labels
std::vector<AnnotatedTrace> annotate_dataset(const TraceDataset &ds, const CollectedData &data);

struct TraceInterval {
    MacAddress mac;
    double start = 0.0;
    double end = 0.0;
    bool operator==(const TraceInterval &) const = default;
};

struct TraceSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;      ///< traces of known apps
    std::vector<std::size_t> withheld;  ///< traces dominated by an app outside the known set
};

/// stratified by each trace's majority app label: per known app,
/// round(fraction · n) traces train and the rest test
TraceSplit split_traces(std::span<const AnnotatedTrace> annotated, std::size_t known_apps, double train_fraction,
                        std::uint64_t seed);

std::vector<TraceInterval> intervals_of(const TraceDataset &ds, std::span<const std::size_t> indices);

/// traces overlapping one of `intervals` on the same MAC
std::vector<std::size_t> traces_in(const TraceDataset &ds, std::span<const TraceInterval> intervals);

struct TrainingOutcome {
    ClassifierBundle bundle;
    TrainingLog log;
    std::vector<TraceInterval> test_intervals;
    std::vector<TraceInterval> withheld_intervals;
    double seconds = 0.0;
};

TrainingOutcome train_from(const CollectedData &data, const RunConfig &cfg);

std::vector<TracePrediction> predict_traces(const TraceDataset &ds, std::span<const std::size_t> indices,
                                            const ClassifierBundle &bundle, OpenSetMode mode, std::size_t workers);

// scoring against ground truth

struct TraceTruth {
    std::vector<int> frame_apps;     ///< scenario app index, -1 for noise
    std::vector<int> burst_apps;
    std::vector<int> burst_actions;  ///< -1 for background
    int user = -1;
};

TraceTruth trace_truth(const TrafficTrace &trace, const GroundTruth &truth);

struct ClassificationScores {
    MetricsReport apps;     ///< per frame, classes = known apps + unknown
    MetricsReport actions;  ///< per active burst, classes = category/action + unknown
    double unknown_recall = 0.0;  ///< frames of withheld apps predicted unknown
};

ClassificationScores score_predictions(std::span<const TracePrediction> predictions, std::span<const TraceTruth> truths,
                                       const ClassifierBundle &bundle, const Scenario &scenario);

struct EvalOutcome {
    ClassificationScores openmax;
    ClassificationScores softmax;  ///< same traces, argmax of the softmax (no unknown class)
    std::size_t traces = 0;
    double seconds = 0.0;
};

/// segments `capture` (after optional frame loss), selects the traces
/// inside the training run's test (and, in open world, withheld) intervals,
/// classifies them and only then calls `load_truth` and scores
EvalOutcome evaluate_capture(std::span<const FrameMeta> capture, const Scenario &scenario, const TrainingOutcome &trained,
                             const std::function<GroundTruth()> &load_truth, const RunConfig &cfg, bool open_world,
                             double loss_rate);

// profiling

std::vector<BehaviorSample> behavior_samples(const TraceDataset &ds, std::span<const std::size_t> indices,
                                             std::span<const TracePrediction> predictions,
                                             const ClassifierBundle &bundle, std::size_t w_b);

struct RoomOutcome {
    std::size_t room = 0;
    std::size_t true_users = 0;
    std::size_t macs = 0;
    std::size_t k_max = 0;
    UserProfileSet profiles;
    std::size_t train_samples = 0;
    std::size_t test_samples = 0;
    std::vector<int> cluster_user;            ///< majority true user per cluster (scoring only)
    MetricsReport windows;                    ///< per held-out window, classes = users
    MetricsReport traces;                     ///< per held-out trace, majority vote
    double seconds = 0.0;
};

struct RoomPrediction {
    std::vector<BehaviorSample> train;
    std::vector<BehaviorSample> test;
    UserProfileSet profiles;
    std::size_t macs = 0;
    std::size_t k_max = 0;
    std::vector<MacAddress> member_macs;      ///< MAC of each clustered sample, parallel to profiles.assignment
    std::vector<std::size_t> window_cluster;  ///< per test sample
    std::vector<std::pair<std::size_t, std::size_t>> trace_cluster;  ///< (trace index, cluster)
    TraceDataset dataset;
};

/// profiles the first cfg.room_train_days days and identifies the rest
RoomPrediction profile_room(std::span<const FrameMeta> capture, const MacAddress &ap, const ClassifierBundle &bundle,
                            const RunConfig &cfg);

/// identifies the held-out days against stored profiles; `member_macs`
/// is only kept for scoring
RoomPrediction identify_room(std::span<const FrameMeta> capture, const MacAddress &ap, const ClassifierBundle &bundle,
                             const UserProfileSet &profiles, std::vector<MacAddress> member_macs, const RunConfig &cfg);

RoomOutcome score_room(const RoomPrediction &prediction, const GroundTruth &truth, std::size_t users);

// runtime

/// per-frame wall time of each inference stage and of a full end-to-end
/// pass over traces holding at least `min_samples` frames
std::vector<StageRuntime> measure_runtime(std::span<const FrameMeta> capture, const MacAddress &ap,
                                          const ClassifierBundle &bundle, const RunConfig &cfg,
                                          std::size_t min_samples);

}  // namespace macprint
