// Independent reference implementations used by the unit and acceptance
// tests.  They share no code with the library beyond its data types.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "macprint/featex.hpp"
#include "macprint/profiler.hpp"

namespace oracle {

using namespace macprint;

/// burst statistics restated from their definitions: groups by 1-based rank
/// against 0.2n and 0.8n, moments via explicit power sums
inline std::array<double, burst_feature_count> burst_features(const std::vector<FrameMeta> &fr, double start) {
    std::array<double, burst_feature_count> p{};
    const double n = static_cast<double>(fr.size());
    if (fr.empty()) return p;
    double bytes = 0, ups = 0;
    for (const auto &f : fr) {
        bytes += f.size;
        ups += f.dir == Direction::uplink ? 1 : 0;
    }
    p[0] = n;
    p[1] = bytes / n;
    p[2] = fr.size() > 1 ? (fr.back().t - fr.front().t) / (n - 1) : 0;
    p[3] = ups / n;

    std::vector<double> counts(10, 0.0);
    for (const auto &f : fr) {
        int k = static_cast<int>(std::floor((f.t - start) * 10));
        counts[static_cast<std::size_t>(std::min(9, std::max(0, k)))] += 1;
    }
    const double mu = n / 10;
    double var = 0, s3 = 0, s4 = 0;
    for (double c : counts) var += std::pow(c - mu, 2) / 10;
    for (double c : counts) s3 += std::pow(c - mu, 3) / 10;
    for (double c : counts) s4 += std::pow(c - mu, 4) / 10;
    if (var > 0) {
        p[4] = s4 / (var * var) - 3;
        p[5] = s3 / std::pow(std::sqrt(var), 3);
    }

    for (int side = 0; side < 2; ++side) {
        const Direction dir = side == 0 ? Direction::uplink : Direction::downlink;
        std::vector<double> sizes, times;
        for (const auto &f : fr) {
            if (f.dir != dir) continue;
            sizes.push_back(f.size);
            times.push_back(f.t);
        }
        const std::size_t base = side == 0 ? 6 : 14;
        if (sizes.empty()) continue;
        const double m = static_cast<double>(sizes.size());
        double sum = 0;
        for (double s : sizes) sum += s;
        p[base] = sum / m;
        std::sort(sizes.begin(), sizes.end());
        std::vector<double> groups[3];
        for (std::size_t r = 1; r <= sizes.size(); ++r) {
            const double rank = static_cast<double>(r);
            const int g = rank <= 0.2 * m ? 0 : (rank > 0.8 * m ? 2 : 1);
            groups[g].push_back(sizes[r - 1]);
        }
        for (int g = 0; g < 3; ++g) {
            if (groups[g].empty()) continue;
            double gm = 0;
            for (double s : groups[g]) gm += s;
            gm /= static_cast<double>(groups[g].size());
            double gv = 0;
            for (double s : groups[g]) gv += (s - gm) * (s - gm);
            gv /= static_cast<double>(groups[g].size());
            p[base + 1 + static_cast<std::size_t>(g)] = gm;
            p[base + 4 + static_cast<std::size_t>(g)] = gv;
        }
        if (times.size() > 1) p[base + 7] = (times.back() - times.front()) / (m - 1);
    }
    return p;
}

/// distance between two behavior samples from their operation windows
inline std::size_t sample_distance(const BehaviorSample &a, const BehaviorSample &b) {
    if (a.mac == b.mac) return 0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.window.size(); ++i) {
        auto x = a.window[i].flatten();
        auto y = b.window[i].flatten();
        for (std::size_t j = 0; j < x.size(); ++j) d += x[j] != y[j];
    }
    return d;
}

/// mean silhouette, O(n²) per sample; singleton members score 0
inline double silhouette(const std::vector<BehaviorSample> &s, const std::vector<std::size_t> &assign) {
    const std::size_t n = s.size();
    const std::size_t k = *std::max_element(assign.begin(), assign.end()) + 1;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0), cnt(k, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[assign[j]] += static_cast<double>(oracle::sample_distance(s[i], s[j]));
            cnt[assign[j]] += 1;
        }
        if (cnt[assign[i]] == 0) continue;
        const double a = sum[assign[i]] / cnt[assign[i]];
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != assign[i] && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
        }
        const double m = std::max(a, b);
        total += m > 0 ? (b - a) / m : 0;
    }
    return total / static_cast<double>(n);
}

}  // namespace oracle
