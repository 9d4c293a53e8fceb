// profiler.hpp
//
// Behavior samples and user profiles.  Operation sequences are collapsed,
// windowed into fixed-length binary samples and clustered in Hamming space;
// the number of users is the k with the best silhouette.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "macprint/trace_model.hpp"

namespace macprint {

class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t bits) : bits_{bits}, words_((bits + 63) / 64, 0) {}
    static BitVector from_bytes(std::span<const std::uint8_t> bits);

    std::size_t size() const { return bits_; }
    bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
    void set(std::size_t i, bool v = true) {
        if (v) {
            words_[i / 64] |= std::uint64_t{1} << (i % 64);
        } else {
            words_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
        }
    }
    std::size_t count() const;
    std::span<const std::uint64_t> words() const { return words_; }

    /// bit i is the (3 - i % 4) bit of hex digit i / 4
    std::string hex() const;
    static BitVector from_hex(std::string_view hex, std::size_t bits);

    bool operator==(const BitVector &) const = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

std::size_t hamming(const BitVector &a, const BitVector &b);

struct BehaviorSequence {
    MacAddress mac;
    std::vector<OperationLabel> operations;  ///< no two neighbours equal
};

/// merges runs of identical labels
BehaviorSequence collapse(std::span<const OperationLabel> ops, const MacAddress &mac = {});

struct BehaviorSample {
    MacAddress mac;
    std::vector<OperationLabel> window;
    BitVector flat;           ///< concatenated one-hots, weight 2·W_b
    std::size_t source = 0;   ///< caller-defined tag, e.g. trace index
};

/// max(0, E - W_b + 1) windows with step 1, each tagged with `source`
std::vector<BehaviorSample> behavior_windows(const BehaviorSequence &seq, std::size_t w_b, std::size_t source = 0);

/// 0 for the same MAC, Hamming distance otherwise; throws on length mismatch
std::size_t sample_distance(const BehaviorSample &a, const BehaviorSample &b);

/// symmetric n × n table of sample_distance
class DistanceMatrix {
public:
    explicit DistanceMatrix(std::span<const BehaviorSample> samples);
    std::size_t size() const { return n_; }
    std::uint32_t operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<std::uint32_t> d_;
};

/// mean silhouette; `assignment[i]` is the cluster of sample i.  Needs at
/// least two non-empty clusters.  Members of singleton clusters score 0.
double silhouette(const DistanceMatrix &d, std::span<const std::size_t> assignment,
                  std::vector<double> *per_sample = nullptr);
double silhouette(std::span<const BehaviorSample> samples, std::span<const std::size_t> assignment);

struct KMeansOptions {
    std::size_t max_iterations = 100;
    std::size_t restarts = 4;
    std::uint64_t seed = 1;

    bool operator==(const KMeansOptions &) const = default;
};

struct UserProfileSet {
    std::size_t k_op = 0;
    std::size_t flat_bits = 0;
    std::vector<BitVector> centroids;
    std::vector<std::size_t> assignment;        ///< per training sample
    std::vector<std::size_t> member_counts;
    std::vector<double> silhouette_curve;       ///< entry i is S for k = i + 2
    std::vector<std::size_t> objective_history; ///< per iteration of the kept run
    std::size_t iterations = 0;
};

/// k-modes in Hamming space: per-bit majority centroids (ties to 0),
/// nearest-centroid assignment (ties to the lowest index), D²-sampled seeds
UserProfileSet kmeans_hamming(std::span<const BehaviorSample> samples, std::size_t k, const KMeansOptions &opts = {});

/// clusters for k = 2..k_max and keeps the best silhouette (ties to the
/// smaller k).  k_max < 2 yields a single profile.  Throws Error when there
/// are fewer samples than k_max.
UserProfileSet select_k(std::span<const BehaviorSample> samples, std::size_t k_max, const KMeansOptions &opts = {});

/// nearest centroid by Hamming distance, ties to the lowest index
std::size_t identify(const BehaviorSample &sample, const UserProfileSet &profiles);

/// majority of per-window decisions (ties to the lowest profile index)
std::size_t identify_majority(std::span<const BehaviorSample> samples, const UserProfileSet &profiles);

/// re-clusters the most recent `window` samples (all when 0)
UserProfileSet refresh_profiles(std::span<const BehaviorSample> samples, std::size_t window, std::size_t k_max,
                                const KMeansOptions &opts = {});

std::string profiles_json(const UserProfileSet &profiles, int indent = 2);
UserProfileSet profiles_from_json(const std::string &text);

}  // namespace macprint
