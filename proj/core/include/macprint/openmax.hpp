// openmax.hpp
//
// Open-set calibration of a classifier's activation vectors.  Each known
// class keeps the mean activation vector (MAV) of its correctly classified
// training samples and a Weibull model of the largest distances to it.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace macprint {

struct Weibull {
    double shape = 1.0;
    double scale = 1.0;
    double shift = 0.0;
    bool degenerate = false;  ///< all tail distances equal; scale = that distance

    double cdf(double x) const;
    bool operator==(const Weibull &) const = default;
};

/// maximum-likelihood two-parameter fit (shift 0); throws Error on fewer
/// than 3 values or any negative / non-finite value
Weibull fit_weibull(std::span<const double> values);

struct OpenMaxConfig {
    std::size_t tail_size = 20;  ///< η
    double delta = 0.5;          ///< δ

    void validate() const;
    bool operator==(const OpenMaxConfig &) const = default;
};

struct OpenMaxModel {
    OpenMaxConfig cfg;
    std::size_t dims = 0;                    ///< activation vector length
    std::vector<std::vector<double>> mav;    ///< one per known class
    std::vector<Weibull> weibull;            ///< one per known class
    std::vector<std::size_t> tail_used;      ///< η after shrinking

    std::size_t classes() const { return mav.size(); }
    std::size_t unknown_index() const { return mav.size(); }

    /// c_h = 1 - CDF_h(‖av - MAV_h‖) for every class
    std::vector<double> confidence(std::span<const double> activation) const;
};

/// `activations` is count × dims; `labels` are the true classes.  Only
/// samples whose argmax equals the label contribute.  η shrinks to the
/// available count per class; a class with fewer than 3 correct samples
/// throws Error.
OpenMaxModel openmax_fit(std::span<const double> activations, std::span<const std::size_t> labels,
                         std::size_t dims, std::size_t classes, const OpenMaxConfig &cfg = {});

/// Q̂ of length H+1: Q̂_h = q_h c_h, Q̂_H = Σ q_h (1 - c_h)
std::vector<double> openmax_calibrate(std::span<const double> q, std::span<const double> c);
std::vector<double> openmax_calibrate(std::span<const double> q, std::span<const double> activation,
                                      const OpenMaxModel &om);

/// H (the unknown index, 0-based) when Q̂_H > δ, otherwise the argmax of
/// the known part with ties to the lowest index
std::size_t openmax_decide(std::span<const double> qhat, double delta);

}  // namespace macprint
