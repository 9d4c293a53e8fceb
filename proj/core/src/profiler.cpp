#include "macprint/profiler.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>

#include <json.hpp>

namespace macprint {

BitVector BitVector::from_bytes(std::span<const std::uint8_t> bits) {
    BitVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) v.set(i);
    }
    return v;
}

std::size_t BitVector::count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::string BitVector::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out((bits_ + 3) / 4, '0');
    for (std::size_t d = 0; d < out.size(); ++d) {
        unsigned v = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            const std::size_t i = d * 4 + b;
            if (i < bits_ && get(i)) v |= 8U >> b;
        }
        out[d] = digits[v];
    }
    return out;
}

BitVector BitVector::from_hex(std::string_view hex, std::size_t bits) {
    if (hex.size() != (bits + 3) / 4) throw Error("hex bitstring has the wrong length");
    BitVector v(bits);
    for (std::size_t d = 0; d < hex.size(); ++d) {
        const char c = hex[d];
        unsigned x;
        if (c >= '0' && c <= '9') {
            x = static_cast<unsigned>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            x = static_cast<unsigned>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            x = static_cast<unsigned>(c - 'A' + 10);
        } else {
            throw Error("bad hex digit in bitstring");
        }
        for (std::size_t b = 0; b < 4; ++b) {
            const std::size_t i = d * 4 + b;
            if (x & (8U >> b)) {
                if (i >= bits) throw Error("hex bitstring sets a bit past its length");
                v.set(i);
            }
        }
    }
    return v;
}

std::size_t hamming(const BitVector &a, const BitVector &b) {
    if (a.size() != b.size()) {
        throw Error("hamming distance of vectors with " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + " bits");
    }
    auto wa = a.words(), wb = b.words();
    std::size_t n = 0;
    for (std::size_t i = 0; i < wa.size(); ++i) n += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    return n;
}

BehaviorSequence collapse(std::span<const OperationLabel> ops, const MacAddress &mac) {
    BehaviorSequence seq;
    seq.mac = mac;
    for (const auto &op : ops) {
        if (seq.operations.empty() || !(seq.operations.back() == op)) seq.operations.push_back(op);
    }
    return seq;
}

std::vector<BehaviorSample> behavior_windows(const BehaviorSequence &seq, std::size_t w_b, std::size_t source) {
    std::vector<BehaviorSample> out;
    const std::size_t E = seq.operations.size();
    if (w_b == 0 || E < w_b) return out;
    std::vector<std::vector<std::uint8_t>> flat_ops;
    flat_ops.reserve(E);
    for (const auto &op : seq.operations) flat_ops.push_back(op.flatten());
    const std::size_t per = flat_ops.front().size();
    for (std::size_t e = 0; e + w_b <= E; ++e) {
        BehaviorSample s;
        s.mac = seq.mac;
        s.source = source;
        s.window.assign(seq.operations.begin() + static_cast<std::ptrdiff_t>(e),
                        seq.operations.begin() + static_cast<std::ptrdiff_t>(e + w_b));
        s.flat = BitVector(w_b * per);
        for (std::size_t j = 0; j < w_b; ++j) {
            const auto &bits = flat_ops[e + j];
            if (bits.size() != per) throw Error("operation labels in one sequence have different widths");
            for (std::size_t b = 0; b < per; ++b) {
                if (bits[b]) s.flat.set(j * per + b);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t sample_distance(const BehaviorSample &a, const BehaviorSample &b) {
    if (a.flat.size() != b.flat.size()) throw Error("behavior samples have different lengths");
    if (a.mac == b.mac) return 0;
    return hamming(a.flat, b.flat);
}

DistanceMatrix::DistanceMatrix(std::span<const BehaviorSample> samples) : n_{samples.size()}, d_(n_ * n_, 0) {
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            const auto v = static_cast<std::uint32_t>(sample_distance(samples[i], samples[j]));
            d_[i * n_ + j] = v;
            d_[j * n_ + i] = v;
        }
    }
}

double silhouette(const DistanceMatrix &d, std::span<const std::size_t> assignment, std::vector<double> *per_sample) {
    const std::size_t n = d.size();
    if (assignment.size() != n) throw Error("silhouette: assignment does not cover every sample");
    std::size_t k = 0;
    for (auto a : assignment) k = std::max(k, a + 1);
    std::vector<std::size_t> size(k, 0);
    for (auto a : assignment) ++size[a];
    std::size_t nonempty = 0;
    for (auto s : size) nonempty += s > 0;
    if (nonempty < 2) throw Error("silhouette needs at least two non-empty clusters");

    std::vector<double> s(n, 0.0);
    std::vector<double> sum(k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = assignment[i];
        if (size[own] < 2) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum[assignment[j]] += d(i, j);
        }
        const double a = sum[own] / static_cast<double>(size[own] - 1);
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || size[c] == 0) continue;
            r = std::min(r, sum[c] / static_cast<double>(size[c]));
        }
        const double m = std::max(r, a);
        s[i] = m > 0 ? (r - a) / m : 0.0;
    }
    double total = 0;
    for (double v : s) total += v;
    if (per_sample) *per_sample = s;
    return total / static_cast<double>(n);
}

double silhouette(std::span<const BehaviorSample> samples, std::span<const std::size_t> assignment) {
    return silhouette(DistanceMatrix(samples), assignment);
}

namespace {

struct KMeansRun {
    std::vector<BitVector> centroids;
    std::vector<std::size_t> assignment;
    std::vector<std::size_t> history;
    std::size_t iterations = 0;
};

std::size_t nearest(const BitVector &x, std::span<const BitVector> centroids, std::size_t *dist = nullptr) {
    std::size_t best = 0, best_d = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const std::size_t dd = hamming(x, centroids[c]);
        if (dd < best_d) {
            best_d = dd;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

std::vector<BitVector> majority_centroids(std::span<const BehaviorSample> samples, std::span<const std::size_t> assign,
                                          std::size_t k, std::size_t bits, std::vector<std::size_t> &counts) {
    std::vector<std::vector<std::uint32_t>> ones(k, std::vector<std::uint32_t>(bits, 0));
    counts.assign(k, 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto &o = ones[assign[i]];
        ++counts[assign[i]];
        auto words = samples[i].flat.words();
        for (std::size_t w = 0; w < words.size(); ++w) {
            std::uint64_t x = words[w];
            while (x) {
                const int b = std::countr_zero(x);
                ++o[w * 64 + static_cast<std::size_t>(b)];
                x &= x - 1;
            }
        }
    }
    std::vector<BitVector> out(k, BitVector(bits));
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t b = 0; b < bits; ++b) {
            // strict majority; an exact tie stays 0
            if (2 * static_cast<std::size_t>(ones[c][b]) > counts[c]) out[c].set(b);
        }
    }
    return out;
}

std::vector<std::size_t> seed_indices(std::span<const BehaviorSample> samples, std::size_t k, std::mt19937_64 &rng) {
    const std::size_t n = samples.size();
    std::vector<std::size_t> seeds;
    seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (seeds.size() < k) {
        const auto &last = samples[seeds.back()];
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(sample_distance(samples[i], last));
            d2[i] = std::min(d2[i], d * d);
            total += d2[i];
        }
        std::size_t pick;
        if (total <= 0) {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        } else {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                if (u < d2[i]) {
                    pick = i;
                    break;
                }
                u -= d2[i];
            }
        }
        seeds.push_back(pick);
    }
    return seeds;
}

KMeansRun kmeans_once(std::span<const BehaviorSample> samples, std::size_t k, std::size_t bits,
                      std::size_t max_iterations, std::mt19937_64 &rng) {
    const std::size_t n = samples.size();
    KMeansRun run;
    for (auto i : seed_indices(samples, k, rng)) run.centroids.push_back(samples[i].flat);
    std::vector<std::size_t> dist(n);
    std::vector<std::size_t> counts;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        std::vector<std::size_t> assign(n);
        std::size_t objective = 0;
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = nearest(samples[i].flat, run.centroids, &dist[i]);
            objective += dist[i];
        }
        run.history.push_back(objective);
        run.iterations = it + 1;
        const bool stable = assign == run.assignment;
        run.assignment = std::move(assign);
        if (stable) break;
        run.centroids = majority_centroids(samples, run.assignment, k, bits, counts);
        // an empty cluster takes the sample farthest from its own centroid
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0, far_d = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t d = hamming(samples[i].flat, run.centroids[run.assignment[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            run.centroids[c] = samples[far].flat;
            counts[c] = 1;
        }
    }
    return run;
}

}  // namespace

UserProfileSet kmeans_hamming(std::span<const BehaviorSample> samples, std::size_t k, const KMeansOptions &opts) {
    if (k == 0) throw Error("k-means needs k ≥ 1");
    if (samples.size() < k) {
        throw Error("k-means with k = " + std::to_string(k) + " on " + std::to_string(samples.size()) + " samples");
    }
    const std::size_t bits = samples.front().flat.size();
    for (const auto &s : samples) {
        if (s.flat.size() != bits) throw Error("behavior samples have different lengths");
    }
    std::mt19937_64 rng(opts.seed * 0x2545f4914f6cdd1dULL + k);
    KMeansRun best;
    bool have = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
        auto run = kmeans_once(samples, k, bits, std::max<std::size_t>(1, opts.max_iterations), rng);
        if (!have || run.history.back() < best.history.back()) {
            best = std::move(run);
            have = true;
        }
    }
    UserProfileSet p;
    p.k_op = k;
    p.flat_bits = bits;
    p.centroids = std::move(best.centroids);
    p.assignment = std::move(best.assignment);
    p.objective_history = std::move(best.history);
    p.iterations = best.iterations;
    p.member_counts.assign(k, 0);
    for (auto a : p.assignment) ++p.member_counts[a];
    return p;
}

UserProfileSet select_k(std::span<const BehaviorSample> samples, std::size_t k_max, const KMeansOptions &opts) {
    if (samples.empty()) throw Error("profiling needs at least one behavior sample");
    if (k_max < 2) return kmeans_hamming(samples, 1, opts);
    if (samples.size() < k_max) {
        throw Error("select_k: " + std::to_string(samples.size()) + " samples for k_max = " + std::to_string(k_max));
    }
    DistanceMatrix d(samples);
    UserProfileSet best;
    double best_s = -std::numeric_limits<double>::infinity();
    std::vector<double> curve;
    for (std::size_t k = 2; k <= k_max; ++k) {
        auto p = kmeans_hamming(samples, k, opts);
        std::size_t nonempty = 0;
        for (auto c : p.member_counts) nonempty += c > 0;
        const double s = nonempty >= 2 ? silhouette(d, p.assignment) : -1.0;
        curve.push_back(s);
        if (s > best_s) {
            best_s = s;
            best = std::move(p);
        }
    }
    best.silhouette_curve = std::move(curve);
    return best;
}

std::size_t identify(const BehaviorSample &sample, const UserProfileSet &profiles) {
    if (profiles.centroids.empty()) throw Error("identify: no profiles");
    return nearest(sample.flat, profiles.centroids);
}

std::size_t identify_majority(std::span<const BehaviorSample> samples, const UserProfileSet &profiles) {
    std::vector<std::size_t> votes(profiles.centroids.size(), 0);
    for (const auto &s : samples) ++votes[identify(s, profiles)];
    return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

UserProfileSet refresh_profiles(std::span<const BehaviorSample> samples, std::size_t window, std::size_t k_max,
                                const KMeansOptions &opts) {
    if (window != 0 && samples.size() > window) samples = samples.subspan(samples.size() - window);
    return select_k(samples, std::min(k_max, samples.size()), opts);
}

std::string profiles_json(const UserProfileSet &p, int indent) {
    nlohmann::json j;
    j["k_op"] = p.k_op;
    j["bits"] = p.flat_bits;
    std::vector<std::string> hex;
    for (const auto &c : p.centroids) hex.push_back(c.hex());
    j["centroids"] = hex;
    j["member_counts"] = p.member_counts;
    j["assignment"] = p.assignment;
    j["silhouette_curve"] = p.silhouette_curve;
    j["iterations"] = p.iterations;
    j["objective_history"] = p.objective_history;
    return j.dump(indent);
}

UserProfileSet profiles_from_json(const std::string &text) {
    auto j = nlohmann::json::parse(text);
    UserProfileSet p;
    p.k_op = j.at("k_op").get<std::size_t>();
    p.flat_bits = j.at("bits").get<std::size_t>();
    for (const auto &h : j.at("centroids")) p.centroids.push_back(BitVector::from_hex(h.get<std::string>(), p.flat_bits));
    p.member_counts = j.at("member_counts").get<std::vector<std::size_t>>();
    p.silhouette_curve = j.at("silhouette_curve").get<std::vector<double>>();
    p.assignment = j.value("assignment", std::vector<std::size_t>{});
    p.iterations = j.value("iterations", std::size_t{0});
    p.objective_history = j.value("objective_history", std::vector<std::size_t>{});
    if (p.centroids.size() != p.k_op || p.member_counts.size() != p.k_op) {
        throw Error("profile file: k_op does not match the centroid list");
    }
    for (auto a : p.assignment) {
        if (a >= p.k_op) throw Error("profile file: assignment refers to a missing cluster");
    }
    return p;
}

}  // namespace macprint
