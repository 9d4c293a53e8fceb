// tcn.hpp
//
// Temporal convolutional network with a self-attention head, in double
// precision with hand-written backpropagation.
//
//   input (window × in_channels)
//     → residual blocks, block l with dilation 2^l:
//         relu(causal_conv) → dropout → relu(causal_conv) → dropout
//         + identity or 1×1 skip, then relu
//     → single-head scaled dot-product self-attention over time (+ residual)
//     → mean over time → fully connected → logits → softmax
//
// The logits are the activation vector consumed by OpenMax.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace macprint {

struct TcnConfig {
    std::size_t channels = 64;
    std::size_t kernel = 3;
    std::size_t levels = 4;
    double dropout = 0.2;
    bool attention = true;
    double learning_rate = 0.001;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
    bool operator==(const TcnConfig &) const = default;
};

class TcnModel {
public:
    TcnModel(const TcnConfig &cfg, std::size_t window, std::size_t in_channels, std::size_t classes);

    const TcnConfig &config() const { return cfg_; }
    std::size_t window() const { return window_; }
    std::size_t in_channels() const { return in_channels_; }
    std::size_t classes() const { return classes_; }
    std::size_t input_size() const { return window_ * in_channels_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    /// logits for `batch` consecutive samples of input_size() values each;
    /// eval mode (no dropout)
    std::vector<double> activations(std::span<const double> inputs, std::size_t batch) const;

    /// softmax probabilities of one sample
    std::vector<double> forward(std::span<const double> sample) const;

    /// Mean cross-entropy over the batch.  When `grad` is non-empty it
    /// receives d loss / d parameters (parameter_count() values).  Dropout
    /// is applied only when `dropout_seed` is non-null.
    double loss(std::span<const double> inputs, std::span<const std::size_t> labels, std::span<double> grad,
                const std::uint64_t *dropout_seed = nullptr) const;

    /// hash of every ReLU on/off decision for one sample; equal hashes mean
    /// the loss is locally smooth between the two parameter settings
    std::uint64_t activation_pattern(std::span<const double> sample) const;

    bool same_shape(const TcnModel &o) const;

private:
    friend struct TcnAccess;
    TcnConfig cfg_;
    std::size_t window_, in_channels_, classes_;
    std::vector<double> params_;
};

std::vector<double> softmax(std::span<const double> logits);

struct LabeledSamples {
    std::vector<double> inputs;      ///< count × input_size
    std::vector<std::size_t> labels;
    std::size_t input_size = 0;

    std::size_t size() const { return labels.size(); }
    void add(std::span<const double> sample, std::size_t label);
};

struct TrainReport {
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;          ///< mean training loss per epoch
    std::vector<double> validation_accuracy; ///< per epoch, empty without a split
};

/// Adam on mean cross-entropy, deterministic per cfg.seed.  Throws Error
/// when fewer than two classes are present or a class has no samples.
TrainReport tcn_train(TcnModel &model, const LabeledSamples &data);

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;  ///< coordinates whose ±h crossed a ReLU boundary
    bool all_finite = true;
};

/// central finite differences (step h) on `coordinates` random parameters;
/// relative error is |a - n| / max(|a|, |n|, 1e-6)
GradientCheck gradient_check(const TcnModel &model, std::span<const double> sample, std::size_t label,
                             std::size_t coordinates, std::uint64_t seed, double h = 1e-5);

}  // namespace macprint
