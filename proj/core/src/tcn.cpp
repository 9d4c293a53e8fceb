#include "macprint/tcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <Eigen/Dense>

#include "macprint/trace_model.hpp"

namespace macprint {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

void TcnConfig::validate() const {
    if (kernel < 2) throw Error("tcn kernel must be at least 2");
    if (!(dropout >= 0 && dropout < 1)) throw Error("tcn dropout must be in [0, 1)");
    if (channels == 0) throw Error("tcn channels must be positive");
    if (!(learning_rate > 0)) throw Error("tcn learning rate must be positive");
    if (batch_size == 0) throw Error("tcn batch size must be positive");
    if (!(validation_fraction >= 0 && validation_fraction < 1)) throw Error("validation fraction must be in [0, 1)");
}

struct BlockLayout {
    std::size_t in = 0, out = 0, dilation = 1;
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
    bool down = false;
    std::size_t wd = 0, bd = 0;
};

struct Layout {
    std::vector<BlockLayout> blocks;
    std::size_t features = 0;
    std::size_t wq = 0, wk = 0, wv = 0;
    std::size_t wfc = 0, bfc = 0;
    std::size_t total = 0;
};

// everything below needs the parameter layout; kept out of the header
struct TcnAccess {
    static Layout layout(const TcnModel &m) {
        const auto &c = m.cfg_;
        Layout L;
        std::size_t off = 0;
        auto take = [&](std::size_t n) {
            std::size_t at = off;
            off += n;
            return at;
        };
        std::size_t in = m.in_channels_;
        for (std::size_t l = 0; l < c.levels; ++l) {
            BlockLayout b;
            b.in = in;
            b.out = c.channels;
            b.dilation = std::size_t{1} << l;
            b.w1 = take(c.kernel * in * c.channels);
            b.b1 = take(c.channels);
            b.w2 = take(c.kernel * c.channels * c.channels);
            b.b2 = take(c.channels);
            b.down = in != c.channels;
            if (b.down) {
                b.wd = take(in * c.channels);
                b.bd = take(c.channels);
            }
            L.blocks.push_back(b);
            in = c.channels;
        }
        L.features = in;
        if (c.attention) {
            L.wq = take(in * in);
            L.wk = take(in * in);
            L.wv = take(in * in);
        }
        L.wfc = take(in * m.classes_);
        L.bfc = take(m.classes_);
        L.total = off;
        return L;
    }
};

namespace {

struct BlockCache {
    Mat x, col1, z1, h1, m1, col2, z2, m2, z3, out;
};

struct Cache {
    std::vector<BlockCache> blocks;
    Mat xf, q, k, v, y;
    std::vector<Mat> attn;
    Mat pooled, logits;
};

MatMap view(std::span<double> p, std::size_t at, std::size_t rows, std::size_t cols) {
    return MatMap(p.data() + at, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMatMap view(std::span<const double> p, std::size_t at, std::size_t rows, std::size_t cols) {
    return ConstMatMap(p.data() + at, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// causal dilated im2col: column block j holds x[t - (k-1-j)·d]
Mat im2col(const Mat &x, std::size_t batch, std::size_t T, std::size_t k, std::size_t d) {
    const auto C = x.cols();
    Mat col = Mat::Zero(x.rows(), static_cast<Eigen::Index>(k) * C);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = (k - 1 - j) * d;
            if (shift >= T) continue;
            const auto rows = static_cast<Eigen::Index>(T - shift);
            col.block(static_cast<Eigen::Index>(b * T + shift), static_cast<Eigen::Index>(j) * C, rows, C) =
                x.block(static_cast<Eigen::Index>(b * T), 0, rows, C);
        }
    }
    return col;
}

Mat col2im(const Mat &dcol, std::size_t batch, std::size_t T, std::size_t k, std::size_t d, Eigen::Index C) {
    Mat dx = Mat::Zero(dcol.rows(), C);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = (k - 1 - j) * d;
            if (shift >= T) continue;
            const auto rows = static_cast<Eigen::Index>(T - shift);
            dx.block(static_cast<Eigen::Index>(b * T), 0, rows, C) +=
                dcol.block(static_cast<Eigen::Index>(b * T + shift), static_cast<Eigen::Index>(j) * C, rows, C);
        }
    }
    return dx;
}

Mat relu(const Mat &z) { return z.cwiseMax(0.0); }

Mat relu_grad(const Mat &dz, const Mat &z) {
    return (z.array() > 0.0).select(dz, 0.0);
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64 &rng) {
    Mat m(rows, cols);
    const double scale = 1.0 / (1.0 - p);
    // two 32-bit uniforms per 64-bit draw
    const auto threshold = static_cast<std::uint64_t>(p * 4294967296.0);
    const Eigen::Index n = m.size();
    for (Eigen::Index i = 0; i < n; i += 2) {
        const std::uint64_t r = rng();
        m.data()[i] = (r & 0xffffffffULL) >= threshold ? scale : 0.0;
        if (i + 1 < n) m.data()[i + 1] = (r >> 32) >= threshold ? scale : 0.0;
    }
    return m;
}

void softmax_rows(Mat &s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
    }
}

void hash_mask(std::uint64_t &h, const Mat &z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        h ^= (z.data()[i] > 0.0 ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL) + (h << 6) + (h >> 2);
    }
}

class Network {
public:
    Network(const TcnModel &m) : m_{m}, L_{TcnAccess::layout(m)}, p_{m.parameters()} {}

    // forward pass over `batch` samples; fills `cache` when given
    Mat forward(std::span<const double> inputs, std::size_t batch, Cache *cache, std::mt19937_64 *drop,
                std::uint64_t *pattern = nullptr) const {
        const auto &c = m_.config();
        const std::size_t T = m_.window();
        Mat x = ConstMatMap(inputs.data(), static_cast<Eigen::Index>(batch * T),
                            static_cast<Eigen::Index>(m_.in_channels()));
        if (cache) cache->blocks.resize(L_.blocks.size());

        for (std::size_t l = 0; l < L_.blocks.size(); ++l) {
            const auto &b = L_.blocks[l];
            auto w1 = view(p_, b.w1, c.kernel * b.in, b.out);
            auto w2 = view(p_, b.w2, c.kernel * b.out, b.out);
            auto b1 = view(p_, b.b1, 1, b.out);
            auto b2 = view(p_, b.b2, 1, b.out);

            Mat col1 = im2col(x, batch, T, c.kernel, b.dilation);
            Mat z1 = col1 * w1;
            z1.rowwise() += b1.row(0);
            Mat h1 = relu(z1);
            Mat m1;
            if (drop && c.dropout > 0) {
                m1 = dropout_mask(h1.rows(), h1.cols(), c.dropout, *drop);
                h1.array() *= m1.array();
            }
            Mat col2 = im2col(h1, batch, T, c.kernel, b.dilation);
            Mat z2 = col2 * w2;
            z2.rowwise() += b2.row(0);
            Mat h2 = relu(z2);
            Mat m2;
            if (drop && c.dropout > 0) {
                m2 = dropout_mask(h2.rows(), h2.cols(), c.dropout, *drop);
                h2.array() *= m2.array();
            }
            Mat z3 = h2;
            if (b.down) {
                Mat r = x * view(p_, b.wd, b.in, b.out);
                r.rowwise() += view(p_, b.bd, 1, b.out).row(0);
                z3 += r;
            } else {
                z3 += x;
            }
            Mat out = relu(z3);
            if (pattern) {
                hash_mask(*pattern, z1);
                hash_mask(*pattern, z2);
                hash_mask(*pattern, z3);
            }
            if (cache) {
                auto &bc = cache->blocks[l];
                bc.x = std::move(x);
                bc.col1 = std::move(col1);
                bc.z1 = std::move(z1);
                bc.h1 = std::move(h1);
                bc.m1 = std::move(m1);
                bc.col2 = std::move(col2);
                bc.z2 = std::move(z2);
                bc.m2 = std::move(m2);
                bc.z3 = std::move(z3);
                x = out;
            } else {
                x = std::move(out);
            }
        }

        const std::size_t F = L_.features;
        Mat y;
        if (c.attention) {
            auto wq = view(p_, L_.wq, F, F);
            auto wk = view(p_, L_.wk, F, F);
            auto wv = view(p_, L_.wv, F, F);
            Mat q = x * wq, k = x * wk, v = x * wv;
            y = x;
            const double scale = 1.0 / std::sqrt(static_cast<double>(F));
            if (cache) cache->attn.resize(batch);
            for (std::size_t s = 0; s < batch; ++s) {
                const auto r0 = static_cast<Eigen::Index>(s * T);
                const auto n = static_cast<Eigen::Index>(T);
                Mat a = (q.middleRows(r0, n) * k.middleRows(r0, n).transpose()) * scale;
                softmax_rows(a);
                y.middleRows(r0, n).noalias() += a * v.middleRows(r0, n);
                if (cache) cache->attn[s] = std::move(a);
            }
            if (cache) {
                cache->xf = std::move(x);
                cache->q = std::move(q);
                cache->k = std::move(k);
                cache->v = std::move(v);
            }
        } else {
            y = x;
            if (cache) cache->xf = std::move(x);
        }

        Mat pooled(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(F));
        for (std::size_t s = 0; s < batch; ++s) {
            pooled.row(static_cast<Eigen::Index>(s)) =
                y.middleRows(static_cast<Eigen::Index>(s * T), static_cast<Eigen::Index>(T)).colwise().mean();
        }
        Mat logits = pooled * view(p_, L_.wfc, F, m_.classes());
        logits.rowwise() += view(p_, L_.bfc, 1, m_.classes()).row(0);
        if (cache) {
            cache->pooled = std::move(pooled);
            cache->logits = logits;
        }
        return logits;
    }

    // dlogits: batch × classes, already divided by the batch size
    void backward(const Cache &cache, const Mat &dlogits, std::size_t batch, std::span<double> grad) const {
        const auto &c = m_.config();
        const std::size_t T = m_.window();
        const std::size_t F = L_.features;
        const auto H = m_.classes();

        view(grad, L_.wfc, F, H).noalias() += cache.pooled.transpose() * dlogits;
        view(grad, L_.bfc, 1, H) += dlogits.colwise().sum();
        Mat dpooled = dlogits * view(p_, L_.wfc, F, H).transpose();

        Mat dy(static_cast<Eigen::Index>(batch * T), static_cast<Eigen::Index>(F));
        for (std::size_t s = 0; s < batch; ++s) {
            for (std::size_t t = 0; t < T; ++t) {
                dy.row(static_cast<Eigen::Index>(s * T + t)) =
                    dpooled.row(static_cast<Eigen::Index>(s)) / static_cast<double>(T);
            }
        }

        Mat dx;
        if (c.attention) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(F));
            dx = dy;  // residual path
            Mat dq(dy.rows(), dy.cols()), dk(dy.rows(), dy.cols()), dv(dy.rows(), dy.cols());
            for (std::size_t s = 0; s < batch; ++s) {
                const auto r0 = static_cast<Eigen::Index>(s * T);
                const auto n = static_cast<Eigen::Index>(T);
                const Mat &a = cache.attn[s];
                auto dout = dy.middleRows(r0, n);
                Mat da = dout * cache.v.middleRows(r0, n).transpose();
                dv.middleRows(r0, n).noalias() = a.transpose() * dout;
                Mat ds = a.array() * (da.colwise() - (da.array() * a.array()).rowwise().sum().matrix()).array();
                dq.middleRows(r0, n).noalias() = (ds * cache.k.middleRows(r0, n)) * scale;
                dk.middleRows(r0, n).noalias() = (ds.transpose() * cache.q.middleRows(r0, n)) * scale;
            }
            view(grad, L_.wq, F, F).noalias() += cache.xf.transpose() * dq;
            view(grad, L_.wk, F, F).noalias() += cache.xf.transpose() * dk;
            view(grad, L_.wv, F, F).noalias() += cache.xf.transpose() * dv;
            dx.noalias() += dq * view(p_, L_.wq, F, F).transpose();
            dx.noalias() += dk * view(p_, L_.wk, F, F).transpose();
            dx.noalias() += dv * view(p_, L_.wv, F, F).transpose();
        } else {
            dx = std::move(dy);
        }

        for (std::size_t li = L_.blocks.size(); li-- > 0;) {
            const auto &b = L_.blocks[li];
            const auto &bc = cache.blocks[li];
            Mat dz3 = relu_grad(dx, bc.z3);
            Mat dz2 = dz3;
            if (bc.m2.size()) dz2.array() *= bc.m2.array();
            dz2 = relu_grad(dz2, bc.z2);
            view(grad, b.w2, c.kernel * b.out, b.out).noalias() += bc.col2.transpose() * dz2;
            view(grad, b.b2, 1, b.out) += dz2.colwise().sum();
            Mat dh1 = col2im(dz2 * view(p_, b.w2, c.kernel * b.out, b.out).transpose(), batch, T, c.kernel,
                             b.dilation, static_cast<Eigen::Index>(b.out));
            if (bc.m1.size()) dh1.array() *= bc.m1.array();
            Mat dz1 = relu_grad(dh1, bc.z1);
            view(grad, b.w1, c.kernel * b.in, b.out).noalias() += bc.col1.transpose() * dz1;
            view(grad, b.b1, 1, b.out) += dz1.colwise().sum();
            Mat dxin = col2im(dz1 * view(p_, b.w1, c.kernel * b.in, b.out).transpose(), batch, T, c.kernel,
                              b.dilation, static_cast<Eigen::Index>(b.in));
            if (b.down) {
                view(grad, b.wd, b.in, b.out).noalias() += bc.x.transpose() * dz3;
                view(grad, b.bd, 1, b.out) += dz3.colwise().sum();
                dxin.noalias() += dz3 * view(p_, b.wd, b.in, b.out).transpose();
            } else {
                dxin += dz3;
            }
            dx = std::move(dxin);
        }
    }

private:
    const TcnModel &m_;
    Layout L_;
    std::span<const double> p_;
};

double cross_entropy(const Mat &logits, std::span<const std::size_t> labels, Mat *dlogits) {
    const auto B = logits.rows();
    double loss = 0;
    if (dlogits) dlogits->resize(B, logits.cols());
    for (Eigen::Index r = 0; r < B; ++r) {
        const double mx = logits.row(r).maxCoeff();
        RowVec e = (logits.row(r).array() - mx).exp();
        const double z = e.sum();
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
        loss += -(logits(r, y) - mx - std::log(z));
        if (dlogits) {
            dlogits->row(r) = e / z;
            (*dlogits)(r, y) -= 1.0;
        }
    }
    if (dlogits) *dlogits /= static_cast<double>(B);
    return loss / static_cast<double>(B);
}

}  // namespace

TcnModel::TcnModel(const TcnConfig &cfg, std::size_t window, std::size_t in_channels, std::size_t classes)
    : cfg_{cfg}, window_{window}, in_channels_{in_channels}, classes_{classes} {
    cfg_.validate();
    if (window == 0 || in_channels == 0) throw Error("tcn input shape must be non-empty");
    if (classes < 2) throw Error("tcn needs at least two classes");
    const Layout L = TcnAccess::layout(*this);
    params_.assign(L.total, 0.0);

    std::mt19937_64 rng(cfg_.seed * 0x9e3779b97f4a7c15ULL + 0x7c);
    auto fill = [&](std::size_t at, std::size_t n, double stddev) {
        std::normal_distribution<double> nd(0.0, stddev);
        for (std::size_t i = 0; i < n; ++i) params_[at + i] = nd(rng);
    };
    for (const auto &b : L.blocks) {
        fill(b.w1, cfg_.kernel * b.in * b.out, std::sqrt(2.0 / static_cast<double>(cfg_.kernel * b.in)));
        fill(b.w2, cfg_.kernel * b.out * b.out, std::sqrt(2.0 / static_cast<double>(cfg_.kernel * b.out)));
        if (b.down) fill(b.wd, b.in * b.out, std::sqrt(1.0 / static_cast<double>(b.in)));
    }
    if (cfg_.attention) {
        const double s = 1.0 / std::sqrt(static_cast<double>(L.features));
        fill(L.wq, L.features * L.features, s);
        fill(L.wk, L.features * L.features, s);
        fill(L.wv, L.features * L.features, s * 0.5);
    }
    fill(L.wfc, L.features * classes_, 0.01);
}

bool TcnModel::same_shape(const TcnModel &o) const {
    return cfg_.channels == o.cfg_.channels && cfg_.kernel == o.cfg_.kernel && cfg_.levels == o.cfg_.levels &&
           cfg_.attention == o.cfg_.attention && window_ == o.window_ && in_channels_ == o.in_channels_ &&
           classes_ == o.classes_;
}

std::vector<double> TcnModel::activations(std::span<const double> inputs, std::size_t batch) const {
    if (inputs.size() != batch * input_size()) {
        throw Error("tcn input has " + std::to_string(inputs.size()) + " values, expected " +
                    std::to_string(batch * input_size()));
    }
    Network net(*this);
    std::vector<double> out(batch * classes_);
    constexpr std::size_t chunk = 128;
    for (std::size_t s = 0; s < batch; s += chunk) {
        const std::size_t n = std::min(chunk, batch - s);
        Mat logits = net.forward(inputs.subspan(s * input_size(), n * input_size()), n, nullptr, nullptr);
        std::copy(logits.data(), logits.data() + logits.size(), out.begin() + static_cast<std::ptrdiff_t>(s * classes_));
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0;
    for (auto &v : out) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto &v : out) v /= z;
    return out;
}

std::vector<double> TcnModel::forward(std::span<const double> sample) const {
    return softmax(activations(sample, 1));
}

double TcnModel::loss(std::span<const double> inputs, std::span<const std::size_t> labels, std::span<double> grad,
                      const std::uint64_t *dropout_seed) const {
    const std::size_t batch = labels.size();
    if (inputs.size() != batch * input_size()) throw Error("tcn loss: input/label count mismatch");
    for (auto y : labels) {
        if (y >= classes_) throw Error("tcn loss: label out of range");
    }
    Network net(*this);
    std::mt19937_64 rng(dropout_seed ? *dropout_seed : 0);
    if (grad.empty()) {
        Mat logits = net.forward(inputs, batch, nullptr, dropout_seed ? &rng : nullptr);
        return cross_entropy(logits, labels, nullptr);
    }
    if (grad.size() != params_.size()) throw Error("tcn loss: gradient buffer has the wrong size");
    Cache cache;
    Mat logits = net.forward(inputs, batch, &cache, dropout_seed ? &rng : nullptr);
    Mat dlogits;
    double l = cross_entropy(logits, labels, &dlogits);
    net.backward(cache, dlogits, batch, grad);
    return l;
}

std::uint64_t TcnModel::activation_pattern(std::span<const double> sample) const {
    Network net(*this);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    net.forward(sample, 1, nullptr, nullptr, &h);
    return h;
}

void LabeledSamples::add(std::span<const double> sample, std::size_t label) {
    if (input_size == 0) input_size = sample.size();
    if (sample.size() != input_size) throw Error("labeled sample has the wrong size");
    inputs.insert(inputs.end(), sample.begin(), sample.end());
    labels.push_back(label);
}

TrainReport tcn_train(TcnModel &model, const LabeledSamples &data) {
    const auto &cfg = model.config();
    if (data.input_size != model.input_size()) throw Error("training samples do not match the model input");
#if defined(__GLIBC__)
    // batch temporaries are a few MB each; keep them on the heap instead of
    // mapping and unmapping fresh pages for every batch
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    std::vector<std::size_t> counts(model.classes(), 0);
    for (auto y : data.labels) {
        if (y >= model.classes()) throw Error("training label out of range");
        ++counts[y];
    }
    std::size_t present = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw Error("class " + std::to_string(k) + " has no training samples");
        ++present;
    }
    if (present < 2) throw Error("training needs at least two classes");

    std::mt19937_64 rng(cfg.seed ^ 0x5151);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    const std::size_t D = model.input_size();
    auto gather = [&](std::span<const std::size_t> idx, std::vector<double> &x, std::vector<std::size_t> &y) {
        x.resize(idx.size() * D);
        y.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(data.inputs.begin() + static_cast<std::ptrdiff_t>(idx[i] * D), D,
                        x.begin() + static_cast<std::ptrdiff_t>(i * D));
            y[i] = data.labels[idx[i]];
        }
    };
    auto mean_loss = [&](std::span<const std::size_t> idx) {
        std::vector<double> x;
        std::vector<std::size_t> y;
        double total = 0;
        for (std::size_t s = 0; s < idx.size(); s += 256) {
            auto part = idx.subspan(s, std::min<std::size_t>(256, idx.size() - s));
            gather(part, x, y);
            total += model.loss(x, y, {}) * static_cast<double>(part.size());
        }
        return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
    };

    TrainReport report;
    report.initial_loss = mean_loss(train);

    const std::size_t P = model.parameter_count();
    std::vector<double> m(P, 0.0), v(P, 0.0), grad(P);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> x;
    std::vector<std::size_t> y;
    auto params = model.parameters();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        double epoch_loss = 0;
        for (std::size_t s = 0; s < train.size(); s += cfg.batch_size) {
            auto part = std::span<const std::size_t>(train).subspan(s, std::min(cfg.batch_size, train.size() - s));
            gather(part, x, y);
            std::fill(grad.begin(), grad.end(), 0.0);
            std::uint64_t drop_seed = rng();
            epoch_loss += model.loss(x, y, grad, &drop_seed) * static_cast<double>(part.size());
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < P; ++i) {
                m[i] = beta1 * m[i] + (1 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1 - beta2) * grad[i] * grad[i];
                params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        }
        report.epoch_loss.push_back(train.empty() ? 0.0 : epoch_loss / static_cast<double>(train.size()));
        if (!val.empty()) {
            std::size_t correct = 0;
            for (std::size_t s = 0; s < val.size(); s += 256) {
                auto part = std::span<const std::size_t>(val).subspan(s, std::min<std::size_t>(256, val.size() - s));
                gather(part, x, y);
                auto logits = model.activations(x, part.size());
                for (std::size_t i = 0; i < part.size(); ++i) {
                    auto row = std::span<const double>(logits).subspan(i * model.classes(), model.classes());
                    auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
                    correct += best == y[i];
                }
            }
            report.validation_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(val.size()));
        }
    }
    return report;
}

GradientCheck gradient_check(const TcnModel &model, std::span<const double> sample, std::size_t label,
                             std::size_t coordinates, std::uint64_t seed, double h) {
    GradientCheck out;
    const std::size_t P = model.parameter_count();
    std::vector<double> grad(P, 0.0);
    const std::size_t labels[] = {label};
    model.loss(sample, labels, grad);
    for (double g : grad) {
        if (!std::isfinite(g)) out.all_finite = false;
    }

    TcnModel probe = model;
    auto params = probe.parameters();
    const std::uint64_t base_pattern = model.activation_pattern(sample);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, P - 1);
    const std::size_t budget = coordinates * 20;
    for (std::size_t attempt = 0; attempt < budget && out.checked < coordinates; ++attempt) {
        const std::size_t i = pick(rng);
        const double saved = params[i];
        params[i] = saved + h;
        const double plus = probe.loss(sample, labels, {});
        const bool smooth_plus = probe.activation_pattern(sample) == base_pattern;
        params[i] = saved - h;
        const double minus = probe.loss(sample, labels, {});
        const bool smooth_minus = probe.activation_pattern(sample) == base_pattern;
        params[i] = saved;
        if (!smooth_plus || !smooth_minus) {
            ++out.skipped_kinks;
            continue;
        }
        const double numeric = (plus - minus) / (2 * h);
        const double analytic = grad[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic - numeric) / denom);
        ++out.checked;
    }
    return out;
}

}  // namespace macprint
