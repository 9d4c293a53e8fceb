// run_config.hpp
//
// Every tunable of a pipeline run in one place, stored as a plain-text
// `key = value` file.  Unknown keys are errors; missing keys keep their
// defaults.  dump() followed by parse() reproduces the config exactly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macprint/classifier.hpp"
#include "macprint/ingest.hpp"
#include "macprint/profiler.hpp"

namespace macprint {

struct RunConfig {
    std::uint64_t seed = 1;
    std::string workdir = "macprint-run";

    // ingest
    SegmenterConfig segmenter;

    // classifiers
    ClassifierSettings classifier;
    double train_fraction = 0.6;

    // profiling
    std::size_t behavior_window = 20;        ///< W_b
    std::size_t k_max = 0;                   ///< 0: number of observed MACs
    KMeansOptions kmeans;
    std::size_t refresh_window = 0;          ///< samples kept when profiles are refreshed, 0 = all

    // synthetic data
    std::size_t catalog_apps = 10;
    std::size_t known_apps = 8;              ///< apps [0, known_apps) are trained on
    std::size_t actions_per_app = 4;
    std::uint64_t catalog_seed = 11;
    std::size_t instances_per_app = 10;
    double instance_length = 120.0;
    double instance_gap = 40.0;
    std::vector<std::size_t> rooms{3, 4, 5};  ///< users per room
    std::size_t room_days = 5;
    std::size_t room_train_days = 3;
    std::size_t sessions_per_day = 2;
    double session_length = 300.0;
    double day_length = 86400.0;

    // evaluation
    bool open_world = false;
    double loss_rate = 0.0;
    std::size_t workers = 0;                 ///< 0: hardware concurrency
    std::size_t runtime_samples = 2000;

    void validate() const;
    bool operator==(const RunConfig &) const = default;
};

RunConfig parse_run_config(std::istream &in, const std::string &source = "<config>");
RunConfig load_run_config(const std::filesystem::path &path);
void dump_run_config(std::ostream &out, const RunConfig &cfg);
std::string dump_run_config(const RunConfig &cfg);

/// FNV-1a of the dumped text, as 16 hex digits
std::string config_hash(const RunConfig &cfg);

}  // namespace macprint
