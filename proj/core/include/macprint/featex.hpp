// featex.hpp
//
// Two feature views of a traffic trace:
//
//  * app samples: a window of W_s frames centred on every frame, three
//    channels per row (clipped inter-arrival, size/1500, direction);
//  * action samples: one-second bursts summarised by 22 statistics, then a
//    window of W_a standardized burst vectors centred on every burst.
//
// Boundary windows replicate the first/last row.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "macprint/trace_model.hpp"

namespace macprint {

inline constexpr std::size_t app_channels = 3;
inline constexpr std::size_t burst_feature_count = 22;

/// nearest odd window ≥ w (30 → 31)
std::size_t effective_window(std::size_t w);

struct AppSample {
    std::size_t window = 0;
    std::vector<double> rows;  ///< window × app_channels, row-major
    std::size_t center_index = 0;
    double center_time = 0.0;
};

/// per-frame channel values before windowing
std::vector<std::array<double, app_channels>> app_channels_of(const TrafficTrace &trace);

/// one sample per frame; throws Error for even or < 3 windows
std::vector<AppSample> extract_app_samples(const TrafficTrace &trace, std::size_t window);

/// writes the window centred on `center` straight into `out`
/// (window × app_channels values)
void write_app_window(std::span<const std::array<double, app_channels>> channels, std::size_t center,
                      std::size_t window, std::span<double> out);

inline std::size_t burst_count(double duration) {
    return static_cast<std::size_t>(std::floor(duration)) + 1;
}
inline std::size_t burst_count(const TrafficTrace &trace) { return burst_count(trace.duration()); }

struct Burst {
    std::size_t first = 0;  ///< frame index range [first, last)
    std::size_t last = 0;
    double start = 0.0;

    std::size_t size() const { return last - first; }
};

/// consecutive one-second bins from the first frame; empty bins are kept
std::vector<Burst> burstify(const TrafficTrace &trace);

/// index of the burst that holds time t
std::size_t burst_index(const TrafficTrace &trace, double t);

struct BurstFeatures {
    std::array<double, burst_feature_count> p{};
    std::size_t index = 0;
    double start = 0.0;

    double operator[](std::size_t i) const { return p[i]; }
};

/// the 22 burst statistics (p1..p22 at indices 0..21); an empty burst
/// gives all zeros
BurstFeatures burst_features(std::span<const FrameMeta> frames, double burst_start);

std::vector<BurstFeatures> trace_burst_features(const TrafficTrace &trace);

/// per-feature standardization fitted on training bursts only
struct FeatureScaler {
    std::array<double, burst_feature_count> mean{};
    std::array<double, burst_feature_count> stddev{};
    static constexpr double epsilon = 1e-9;

    static FeatureScaler fit(std::span<const BurstFeatures> training);
    std::array<double, burst_feature_count> transform(const BurstFeatures &f) const;
};

struct ActionSample {
    std::size_t window = 0;
    std::vector<double> rows;  ///< window × burst_feature_count, standardized
    std::size_t center_burst = 0;
};

std::vector<ActionSample> extract_action_samples(std::span<const BurstFeatures> features, std::size_t window,
                                                 const FeatureScaler &scaler);

/// Gaussian kernel density of `values` at `points` evaluation points
/// spanning [min, max] (Silverman bandwidth).  Returns (x, density) pairs.
std::vector<std::pair<double, double>> density_curve(std::span<const double> values, std::size_t points = 128);

void write_burst_features_jsonl(std::ostream &out, std::span<const BurstFeatures> features);

}  // namespace macprint
