#include "macprint/openmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "macprint/trace_model.hpp"

namespace macprint {

namespace {

constexpr double shape_cap = 1e4;

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

double Weibull::cdf(double x) const {
    const double z = x - shift;
    if (z <= 0) return 0.0;
    return 1.0 - std::exp(-std::pow(z / scale, shape));
}

Weibull fit_weibull(std::span<const double> values) {
    if (values.size() < 3) throw Error("weibull fit needs at least 3 values");
    double mx = 0, mn = values.front();
    for (double v : values) {
        if (!std::isfinite(v) || v < 0) throw Error("weibull fit needs finite non-negative values");
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    Weibull w;
    if (mx <= 0 || mn <= 0 || mx - mn <= 1e-12 * mx) {
        // constant tail (or a zero that sends ln to -inf): no spread to fit
        w.degenerate = true;
        w.shape = shape_cap;
        w.scale = mx > 0 ? mx : std::numeric_limits<double>::min();
        if (mn <= 0 && mx - mn > 1e-12 * mx) {
            // zeros mixed with positive values; fit on the positive part
            std::vector<double> pos;
            for (double v : values) {
                if (v > 0) pos.push_back(v);
            }
            if (pos.size() >= 3) return fit_weibull(pos);
            w.scale = mx;
        }
        return w;
    }

    // work on y = x / max so the fit is exactly scale-equivariant
    std::vector<double> ln(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) ln[i] = std::log(values[i] / mx);
    const double mean_ln = std::accumulate(ln.begin(), ln.end(), 0.0) / static_cast<double>(ln.size());
    // profile-likelihood equation, increasing in k
    auto g = [&](double k) {
        double sw = 0, swl = 0;
        for (double l : ln) {
            const double e = std::exp(k * l);
            sw += e;
            swl += e * l;
        }
        return swl / sw - 1.0 / k - mean_ln;
    };
    double lo = std::log(1e-4), hi = std::log(shape_cap);
    double k;
    if (g(std::exp(hi)) <= 0) {
        k = shape_cap;
    } else {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (g(std::exp(mid)) < 0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        k = std::exp(0.5 * (lo + hi));
    }
    double mk = 0;
    for (double l : ln) mk += std::exp(k * l);
    mk /= static_cast<double>(ln.size());
    w.shape = k;
    w.scale = mx * std::pow(mk, 1.0 / k);
    return w;
}

void OpenMaxConfig::validate() const {
    if (tail_size < 3) throw Error("openmax tail size must be at least 3");
    if (!(delta >= 0 && delta <= 1)) throw Error("openmax delta must be in [0, 1]");
}

std::vector<double> OpenMaxModel::confidence(std::span<const double> activation) const {
    if (activation.size() != dims) throw Error("activation vector has the wrong length");
    std::vector<double> c(mav.size());
    for (std::size_t h = 0; h < mav.size(); ++h) c[h] = 1.0 - weibull[h].cdf(euclidean(activation, mav[h]));
    return c;
}

OpenMaxModel openmax_fit(std::span<const double> activations, std::span<const std::size_t> labels,
                         std::size_t dims, std::size_t classes, const OpenMaxConfig &cfg) {
    cfg.validate();
    if (dims == 0 || activations.size() != labels.size() * dims) {
        throw Error("openmax fit: activations do not match labels");
    }
    OpenMaxModel om;
    om.cfg = cfg;
    om.dims = dims;
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw Error("openmax fit: label out of range");
        auto row = activations.subspan(i * dims, dims);
        auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[i]) members[labels[i]].push_back(i);
    }
    for (std::size_t h = 0; h < classes; ++h) {
        const auto &m = members[h];
        if (m.size() < 3) {
            throw Error("openmax fit: class " + std::to_string(h) + " has " + std::to_string(m.size()) +
                        " correctly classified samples, need at least 3");
        }
        std::vector<double> mav(dims, 0.0);
        for (auto i : m) {
            for (std::size_t d = 0; d < dims; ++d) mav[d] += activations[i * dims + d];
        }
        for (auto &v : mav) v /= static_cast<double>(m.size());
        std::vector<double> dist;
        dist.reserve(m.size());
        for (auto i : m) dist.push_back(euclidean(activations.subspan(i * dims, dims), mav));
        const std::size_t eta = std::min(cfg.tail_size, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(eta), dist.end(), std::greater<>());
        dist.resize(eta);
        om.weibull.push_back(fit_weibull(dist));
        om.mav.push_back(std::move(mav));
        om.tail_used.push_back(eta);
    }
    return om;
}

std::vector<double> openmax_calibrate(std::span<const double> q, std::span<const double> c) {
    if (q.size() != c.size()) throw Error("openmax calibrate: dimension mismatch");
    std::vector<double> out(q.size() + 1, 0.0);
    double unknown = 0;
    for (std::size_t h = 0; h < q.size(); ++h) {
        out[h] = q[h] * c[h];
        unknown += q[h] * (1.0 - c[h]);
    }
    out[q.size()] = unknown;
    return out;
}

std::vector<double> openmax_calibrate(std::span<const double> q, std::span<const double> activation,
                                      const OpenMaxModel &om) {
    if (q.size() != om.classes()) throw Error("openmax calibrate: dimension mismatch");
    return openmax_calibrate(q, om.confidence(activation));
}

std::size_t openmax_decide(std::span<const double> qhat, double delta) {
    if (qhat.size() < 2) throw Error("openmax decide: need at least one known class");
    const std::size_t H = qhat.size() - 1;
    if (qhat[H] > delta) return H;
    return static_cast<std::size_t>(std::max_element(qhat.begin(), qhat.begin() + static_cast<std::ptrdiff_t>(H)) -
                                    qhat.begin());
}

}  // namespace macprint
