// metrics.hpp
//
// Classification scores and stage timings with JSON and plain-text output.

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace macprint {

struct ClassMetrics {
    std::string name;
    std::size_t support = 0;
    std::size_t predicted = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct StageRuntime {
    std::string stage;
    std::size_t samples = 0;
    double total_ms = 0.0;

    double ms_per_sample() const { return samples ? total_ms / static_cast<double>(samples) : 0.0; }
};

struct MetricsReport {
    std::string title;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::size_t>> confusion;  ///< [truth][predicted]
    std::size_t samples = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;   ///< over classes that occur in truth or prediction
    std::vector<ClassMetrics> per_class;
    std::vector<StageRuntime> runtimes;
    std::map<std::string, double> extras;
};

/// labels must lie in [0, class_names.size())
MetricsReport score_labels(std::span<const int> truth, std::span<const int> predicted,
                           std::vector<std::string> class_names, std::string title = {});

std::string metrics_json(const MetricsReport &report, int indent = 2);
MetricsReport metrics_from_json(const std::string &text);

/// aligned text: summary lines, per-class table, confusion matrix, runtimes
std::string format_report(const MetricsReport &report);

/// generic aligned table; the first row is the header
std::string format_table(const std::vector<std::vector<std::string>> &rows);

}  // namespace macprint
