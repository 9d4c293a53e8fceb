#include "macprint/featex.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace macprint {

std::size_t effective_window(std::size_t w) {
    if (w < 3) return 3;
    return w % 2 == 1 ? w : w + 1;
}

std::vector<std::array<double, app_channels>> app_channels_of(const TrafficTrace &trace) {
    auto frames = trace.frames();
    std::vector<std::array<double, app_channels>> out(frames.size());
    for (std::size_t m = 0; m < frames.size(); ++m) {
        double dt = m == 0 ? 0.0 : std::min(frames[m].t - frames[m - 1].t, 1.0);
        out[m] = {dt, static_cast<double>(frames[m].size) / 1500.0, static_cast<double>(sign(frames[m].dir))};
    }
    return out;
}

void write_app_window(std::span<const std::array<double, app_channels>> channels, std::size_t center,
                      std::size_t window, std::span<double> out) {
    const auto half = static_cast<std::ptrdiff_t>(window / 2);
    const auto last = static_cast<std::ptrdiff_t>(channels.size()) - 1;
    for (std::size_t r = 0; r < window; ++r) {
        auto idx = std::clamp(static_cast<std::ptrdiff_t>(center) - half + static_cast<std::ptrdiff_t>(r),
                              std::ptrdiff_t{0}, last);
        const auto &row = channels[static_cast<std::size_t>(idx)];
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(r * app_channels));
    }
}

std::vector<AppSample> extract_app_samples(const TrafficTrace &trace, std::size_t window) {
    if (window < 3 || window % 2 == 0) {
        throw Error("app window must be odd and at least 3, got " + std::to_string(window));
    }
    auto channels = app_channels_of(trace);
    std::vector<AppSample> out(trace.size());
    for (std::size_t m = 0; m < trace.size(); ++m) {
        auto &s = out[m];
        s.window = window;
        s.rows.resize(window * app_channels);
        s.center_index = m;
        s.center_time = trace.frames()[m].t;
        write_app_window(channels, m, window, s.rows);
    }
    return out;
}

std::size_t burst_index(const TrafficTrace &trace, double t) {
    const std::size_t n = burst_count(trace);
    double off = t - trace.start();
    if (off <= 0) return 0;
    return std::min(n - 1, static_cast<std::size_t>(off));
}

std::vector<Burst> burstify(const TrafficTrace &trace) {
    const std::size_t n = burst_count(trace);
    std::vector<Burst> out(n);
    auto frames = trace.frames();
    std::size_t i = 0;
    for (std::size_t b = 0; b < n; ++b) {
        out[b].start = trace.start() + static_cast<double>(b);
        out[b].first = i;
        while (i < frames.size() && burst_index(trace, frames[i].t) == b) ++i;
        out[b].last = i;
    }
    return out;
}

namespace {

struct DirectionStats {
    double mean = 0, low_mean = 0, mid_mean = 0, high_mean = 0;
    double low_var = 0, mid_var = 0, high_var = 0;
    double mean_gap = 0;
};

void mean_var(std::span<const double> v, double &mean, double &var) {
    if (v.empty()) {
        mean = var = 0;
        return;
    }
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0;
    for (double x : v) acc += (x - mean) * (x - mean);
    var = acc / static_cast<double>(v.size());
}

DirectionStats direction_stats(std::span<const FrameMeta> frames, Direction dir) {
    DirectionStats st;
    std::vector<double> sizes;
    double prev_t = 0, gap_sum = 0;
    for (const auto &f : frames) {
        if (f.dir != dir) continue;
        if (!sizes.empty()) gap_sum += f.t - prev_t;
        prev_t = f.t;
        sizes.push_back(static_cast<double>(f.size));
    }
    const std::size_t n = sizes.size();
    if (n == 0) return st;
    if (n >= 2) st.mean_gap = gap_sum / static_cast<double>(n - 1);
    double var;
    mean_var(sizes, st.mean, var);
    std::sort(sizes.begin(), sizes.end());
    // rank r (1-based) is low when r ≤ 0.2n, high when r > 0.8n
    std::size_t low = n / 5;
    std::size_t high_from = (4 * n) / 5;
    std::span<const double> all(sizes);
    mean_var(all.subspan(0, low), st.low_mean, st.low_var);
    mean_var(all.subspan(low, high_from - low), st.mid_mean, st.mid_var);
    mean_var(all.subspan(high_from), st.high_mean, st.high_var);
    return st;
}

}  // namespace

BurstFeatures burst_features(std::span<const FrameMeta> frames, double burst_start) {
    BurstFeatures bf;
    bf.start = burst_start;
    auto &p = bf.p;
    const std::size_t n = frames.size();
    if (n == 0) return bf;

    double total = 0;
    std::size_t up = 0;
    std::array<double, 10> bins{};
    for (const auto &f : frames) {
        total += f.size;
        if (f.dir == Direction::uplink) ++up;
        auto sub = static_cast<std::ptrdiff_t>(std::floor((f.t - burst_start) * 10.0));
        bins[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sub, 0, 9))] += 1;
    }
    p[0] = static_cast<double>(n);
    p[1] = total / static_cast<double>(n);
    p[2] = n >= 2 ? (frames.back().t - frames.front().t) / static_cast<double>(n - 1) : 0.0;
    p[3] = static_cast<double>(up) / static_cast<double>(n);

    double mu = std::accumulate(bins.begin(), bins.end(), 0.0) / 10.0;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double c : bins) {
        double d = c - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= 10;
    m3 /= 10;
    m4 /= 10;
    if (m2 > 0) {
        p[4] = m4 / (m2 * m2) - 3.0;
        p[5] = m3 / std::pow(m2, 1.5);
    }

    auto u = direction_stats(frames, Direction::uplink);
    auto d = direction_stats(frames, Direction::downlink);
    p[6] = u.mean;
    p[7] = u.low_mean;
    p[8] = u.mid_mean;
    p[9] = u.high_mean;
    p[10] = u.low_var;
    p[11] = u.mid_var;
    p[12] = u.high_var;
    p[13] = u.mean_gap;
    p[14] = d.mean;
    p[15] = d.low_mean;
    p[16] = d.mid_mean;
    p[17] = d.high_mean;
    p[18] = d.low_var;
    p[19] = d.mid_var;
    p[20] = d.high_var;
    p[21] = d.mean_gap;
    return bf;
}

std::vector<BurstFeatures> trace_burst_features(const TrafficTrace &trace) {
    auto bursts = burstify(trace);
    auto frames = trace.frames();
    std::vector<BurstFeatures> out;
    out.reserve(bursts.size());
    for (std::size_t b = 0; b < bursts.size(); ++b) {
        auto f = burst_features(frames.subspan(bursts[b].first, bursts[b].size()), bursts[b].start);
        f.index = b;
        out.push_back(f);
    }
    return out;
}

FeatureScaler FeatureScaler::fit(std::span<const BurstFeatures> training) {
    FeatureScaler s;
    if (training.empty()) {
        s.stddev.fill(1.0);
        return s;
    }
    const double n = static_cast<double>(training.size());
    for (const auto &f : training) {
        for (std::size_t i = 0; i < burst_feature_count; ++i) s.mean[i] += f.p[i];
    }
    for (auto &m : s.mean) m /= n;
    for (const auto &f : training) {
        for (std::size_t i = 0; i < burst_feature_count; ++i) s.stddev[i] += (f.p[i] - s.mean[i]) * (f.p[i] - s.mean[i]);
    }
    for (auto &v : s.stddev) v = std::sqrt(v / n);
    return s;
}

std::array<double, burst_feature_count> FeatureScaler::transform(const BurstFeatures &f) const {
    std::array<double, burst_feature_count> out{};
    for (std::size_t i = 0; i < burst_feature_count; ++i) {
        out[i] = stddev[i] > epsilon ? (f.p[i] - mean[i]) / stddev[i] : 0.0;
    }
    return out;
}

std::vector<ActionSample> extract_action_samples(std::span<const BurstFeatures> features, std::size_t window,
                                                 const FeatureScaler &scaler) {
    if (window < 3 || window % 2 == 0) {
        throw Error("action window must be odd and at least 3, got " + std::to_string(window));
    }
    std::vector<std::array<double, burst_feature_count>> scaled;
    scaled.reserve(features.size());
    for (const auto &f : features) scaled.push_back(scaler.transform(f));

    const auto half = static_cast<std::ptrdiff_t>(window / 2);
    const auto last = static_cast<std::ptrdiff_t>(features.size()) - 1;
    std::vector<ActionSample> out(features.size());
    for (std::size_t n = 0; n < features.size(); ++n) {
        auto &s = out[n];
        s.window = window;
        s.center_burst = n;
        s.rows.resize(window * burst_feature_count);
        for (std::size_t r = 0; r < window; ++r) {
            auto idx = std::clamp(static_cast<std::ptrdiff_t>(n) - half + static_cast<std::ptrdiff_t>(r),
                                  std::ptrdiff_t{0}, last);
            const auto &row = scaled[static_cast<std::size_t>(idx)];
            std::copy(row.begin(), row.end(), s.rows.begin() + static_cast<std::ptrdiff_t>(r * burst_feature_count));
        }
    }
    return out;
}

std::vector<std::pair<double, double>> density_curve(std::span<const double> values, std::size_t points) {
    std::vector<std::pair<double, double>> out;
    if (values.empty() || points == 0) return out;
    double mean = 0, var = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    const double n = static_cast<double>(values.size());
    double bw = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
    if (!(bw > 0)) bw = 1.0;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double a = *lo - 3 * bw, b = *hi + 3 * bw;
    const double norm = 1.0 / (n * bw * std::sqrt(2 * M_PI));
    for (std::size_t i = 0; i < points; ++i) {
        double x = points == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
        double acc = 0;
        for (double v : values) {
            double z = (x - v) / bw;
            acc += std::exp(-0.5 * z * z);
        }
        out.emplace_back(x, acc * norm);
    }
    return out;
}

void write_burst_features_jsonl(std::ostream &out, std::span<const BurstFeatures> features) {
    for (const auto &f : features) {
        nlohmann::json j{{"burst", f.index}, {"start", f.start}, {"p", f.p}};
        out << j.dump() << '\n';
    }
}

}  // namespace macprint
