// Bundle file layout (all integers little-endian, doubles as IEEE-754 bits):
//
//   "MACPRINT"            8 bytes
//   version               u32
//   payload length        u64
//   payload               see write_payload()
//   crc32(payload)        u32 (zlib polynomial)

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "macprint/classifier.hpp"

namespace macprint {

namespace {

constexpr char magic[8] = {'M', 'A', 'C', 'P', 'R', 'I', 'N', 'T'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string &s) {
        u64(s.size());
        buf_.append(s);
    }
    void doubles(std::span<const double> v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    const std::string &data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_{data} {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        auto n = u64();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<double> doubles() {
        auto n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (auto &x : v) x = f64();
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) throw Error("model bundle is truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

void put_tcn_config(Writer &w, const TcnConfig &c) {
    w.u64(c.channels);
    w.u64(c.kernel);
    w.u64(c.levels);
    w.f64(c.dropout);
    w.u8(c.attention);
    w.f64(c.learning_rate);
    w.u64(c.epochs);
    w.u64(c.batch_size);
    w.f64(c.validation_fraction);
    w.u64(c.seed);
}

TcnConfig get_tcn_config(Reader &r) {
    TcnConfig c;
    c.channels = r.u64();
    c.kernel = r.u64();
    c.levels = r.u64();
    c.dropout = r.f64();
    c.attention = r.u8() != 0;
    c.learning_rate = r.f64();
    c.epochs = r.u64();
    c.batch_size = r.u64();
    c.validation_fraction = r.f64();
    c.seed = r.u64();
    return c;
}

void put_model(Writer &w, const TcnModel &m) {
    put_tcn_config(w, m.config());
    w.u64(m.window());
    w.u64(m.in_channels());
    w.u64(m.classes());
    w.doubles(m.parameters());
}

TcnModel get_model(Reader &r) {
    auto cfg = get_tcn_config(r);
    auto window = r.u64();
    auto in = r.u64();
    auto classes = r.u64();
    TcnModel m(cfg, window, in, classes);
    auto params = r.doubles();
    if (params.size() != m.parameter_count()) throw Error("model bundle: parameter count does not match the shape");
    std::copy(params.begin(), params.end(), m.parameters().begin());
    return m;
}

void put_openmax(Writer &w, const OpenMaxModel &om) {
    w.u64(om.cfg.tail_size);
    w.f64(om.cfg.delta);
    w.u64(om.dims);
    w.u64(om.mav.size());
    for (std::size_t h = 0; h < om.mav.size(); ++h) {
        w.doubles(om.mav[h]);
        w.f64(om.weibull[h].shape);
        w.f64(om.weibull[h].scale);
        w.f64(om.weibull[h].shift);
        w.u8(om.weibull[h].degenerate);
        w.u64(om.tail_used[h]);
    }
}

OpenMaxModel get_openmax(Reader &r) {
    OpenMaxModel om;
    om.cfg.tail_size = r.u64();
    om.cfg.delta = r.f64();
    om.dims = r.u64();
    auto n = r.u64();
    for (std::uint64_t h = 0; h < n; ++h) {
        om.mav.push_back(r.doubles());
        Weibull wb;
        wb.shape = r.f64();
        wb.scale = r.f64();
        wb.shift = r.f64();
        wb.degenerate = r.u8() != 0;
        om.weibull.push_back(wb);
        om.tail_used.push_back(r.u64());
    }
    return om;
}

void write_payload(Writer &w, const ClassifierBundle &b) {
    w.u64(b.apps.size());
    for (std::size_t a = 0; a < b.apps.size(); ++a) {
        w.str(b.apps[a]);
        w.u64(b.app_category[a]);
    }
    w.u64(b.categories.size());
    for (const auto &c : b.categories) w.str(c);
    w.u64(b.app_window);
    w.u64(b.action_window);
    w.u64(b.actions_per_category);
    put_model(w, *b.app_model);
    put_openmax(w, b.app_openmax);
    w.u64(b.actions.size());
    for (const auto &a : b.actions) {
        w.u8(a.has_value());
        if (!a) continue;
        w.str(a->category);
        put_model(w, a->model);
        put_openmax(w, a->openmax);
        w.doubles(a->scaler.mean);
        w.doubles(a->scaler.stddev);
    }
}

ClassifierBundle read_payload(Reader &r) {
    ClassifierBundle b;
    auto n_apps = r.u64();
    for (std::uint64_t a = 0; a < n_apps; ++a) {
        b.apps.push_back(r.str());
        b.app_category.push_back(r.u64());
    }
    auto n_cat = r.u64();
    for (std::uint64_t c = 0; c < n_cat; ++c) b.categories.push_back(r.str());
    b.app_window = r.u64();
    b.action_window = r.u64();
    b.actions_per_category = r.u64();
    b.app_model = get_model(r);
    b.app_openmax = get_openmax(r);
    auto n_actions = r.u64();
    for (std::uint64_t c = 0; c < n_actions; ++c) {
        if (!r.u8()) {
            b.actions.emplace_back();
            continue;
        }
        auto category = r.str();
        auto model = get_model(r);
        auto om = get_openmax(r);
        FeatureScaler scaler;
        auto mean = r.doubles();
        auto sd = r.doubles();
        if (mean.size() != burst_feature_count || sd.size() != burst_feature_count) {
            throw Error("model bundle: scaler has the wrong width");
        }
        std::copy(mean.begin(), mean.end(), scaler.mean.begin());
        std::copy(sd.begin(), sd.end(), scaler.stddev.begin());
        b.actions.emplace_back(ActionClassifier{std::move(category), std::move(model), std::move(om), scaler});
    }
    return b;
}

}  // namespace

void write_bundle(std::ostream &out, const ClassifierBundle &bundle) {
    bundle.validate();
    Writer payload;
    write_payload(payload, bundle);
    const auto &p = payload.data();
    Writer head;
    head.u32(bundle_format_version);
    head.u64(p.size());
    Writer tail;
    tail.u32(static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef *>(p.data()), static_cast<uInt>(p.size()))));
    out.write(magic, sizeof magic);
    out.write(head.data().data(), static_cast<std::streamsize>(head.data().size()));
    out.write(p.data(), static_cast<std::streamsize>(p.size()));
    out.write(tail.data().data(), static_cast<std::streamsize>(tail.data().size()));
    if (!out) throw Error("failed to write model bundle");
}

void write_bundle(const std::filesystem::path &path, const ClassifierBundle &bundle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_bundle(out, bundle);
}

ClassifierBundle read_bundle(std::istream &in) {
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (all.size() < sizeof magic + 12 + 4 || std::memcmp(all.data(), magic, sizeof magic) != 0) {
        throw Error("not a model bundle (bad magic)");
    }
    Reader head(std::string_view(all).substr(sizeof magic, 12));
    const auto version = head.u32();
    if (version != bundle_format_version) {
        throw Error("model bundle version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(bundle_format_version) + ")");
    }
    const auto length = head.u64();
    if (length != all.size() - sizeof magic - 12 - 4) throw Error("model bundle is truncated");
    std::string_view payload = std::string_view(all).substr(sizeof magic + 12, length);
    Reader tail(std::string_view(all).substr(sizeof magic + 12 + length, 4));
    const auto stored = tail.u32();
    const auto actual = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef *>(payload.data()), static_cast<uInt>(payload.size())));
    if (stored != actual) throw Error("model bundle checksum mismatch");
    Reader r(payload);
    auto bundle = read_payload(r);
    if (!r.done()) throw Error("model bundle has trailing bytes");
    bundle.validate();
    return bundle;
}

ClassifierBundle read_bundle(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model bundle " + path.string());
    return read_bundle(in);
}

}  // namespace macprint
