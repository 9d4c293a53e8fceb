#include "macprint/classifier.hpp"

#include <algorithm>
#include <map>

namespace macprint {

void ClassifierSettings::validate() const {
    app_tcn.validate();
    action_tcn.validate();
    openmax.validate();
    if (app_window < 3 || app_window % 2 == 0) throw Error("app window must be odd and at least 3");
    if (action_window < 3 || action_window % 2 == 0) throw Error("action window must be odd and at least 3");
    if (actions_per_category < 2) throw Error("need at least two actions per category");
    if (max_app_samples == 0 || max_action_samples == 0) throw Error("sample caps must be positive");
}

void ClassifierBundle::validate() const {
    if (apps.size() < 2) throw Error("bundle needs at least two known apps");
    if (app_category.size() != apps.size()) throw Error("bundle routing table does not cover every app");
    for (auto c : app_category) {
        if (c >= categories.size()) throw Error("bundle routes an app to a missing category");
    }
    if (actions.size() != categories.size()) throw Error("bundle needs one action slot per category");
    if (!app_model) throw Error("bundle has no app model");
    if (app_model->classes() != apps.size() || app_model->window() != app_window ||
        app_model->in_channels() != app_channels) {
        throw Error("bundle app model shape does not match its settings");
    }
    if (app_openmax.classes() != apps.size() || app_openmax.dims != apps.size()) {
        throw Error("bundle app openmax does not match the app model");
    }
    for (const auto &a : actions) {
        if (!a) continue;
        if (a->model.classes() != actions_per_category || a->model.window() != action_window ||
            a->model.in_channels() != burst_feature_count || a->openmax.classes() != actions_per_category) {
            throw Error("bundle action model for " + a->category + " does not match its settings");
        }
    }
}

int majority_label(std::span<const int> labels) {
    if (labels.empty()) return unknown_label;
    std::vector<std::pair<int, std::size_t>> counts;  // in order of first appearance
    for (int l : labels) {
        auto it = std::find_if(counts.begin(), counts.end(), [l](const auto &p) { return p.first == l; });
        if (it == counts.end()) {
            counts.emplace_back(l, 1);
        } else {
            ++it->second;
        }
    }
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

namespace {

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// classify rows of logits; -1 for unknown
void decide_rows(std::span<const double> logits, std::size_t classes, const OpenMaxModel &om, OpenSetMode mode,
                 std::span<int> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = logits.subspan(i * classes, classes);
        if (mode == OpenSetMode::softmax) {
            out[i] = static_cast<int>(argmax(row));
            continue;
        }
        auto q = softmax(row);
        auto qhat = openmax_calibrate(q, row, om);
        auto d = openmax_decide(qhat, om.cfg.delta);
        out[i] = d == classes ? unknown_label : static_cast<int>(d);
    }
}

std::size_t stride_for(std::size_t total, std::size_t cap) { return std::max<std::size_t>(1, (total + cap - 1) / cap); }

OpenMaxModel fit_openmax(const TcnModel &model, const LabeledSamples &data, const OpenMaxConfig &cfg) {
    auto logits = model.activations(data.inputs, data.size());
    return openmax_fit(logits, data.labels, model.classes(), model.classes(), cfg);
}

}  // namespace

ClassifierBundle train_bundle(std::span<const AnnotatedTrace> traces, std::span<const std::string> apps,
                              std::span<const std::string> app_categories, const ClassifierSettings &settings,
                              TrainingLog *log) {
    settings.validate();
    if (apps.size() != app_categories.size()) throw Error("every known app needs a category");
    if (apps.size() < 2) throw Error("training needs at least two known apps");

    ClassifierBundle bundle;
    bundle.apps.assign(apps.begin(), apps.end());
    for (const auto &c : app_categories) {
        auto it = std::find(bundle.categories.begin(), bundle.categories.end(), c);
        if (it == bundle.categories.end()) {
            bundle.app_category.push_back(bundle.categories.size());
            bundle.categories.push_back(c);
        } else {
            bundle.app_category.push_back(static_cast<std::size_t>(it - bundle.categories.begin()));
        }
    }
    bundle.app_window = settings.app_window;
    bundle.action_window = settings.action_window;
    bundle.actions_per_category = settings.actions_per_category;
    const std::size_t H = apps.size();
    const std::size_t G = settings.actions_per_category;

    TrainingLog local_log;
    TrainingLog &tl = log ? *log : local_log;

    // app model
    std::size_t known_frames = 0;
    for (const auto &at : traces) {
        for (int l : at.frame_app_labels) known_frames += l >= 0 && static_cast<std::size_t>(l) < H;
    }
    const std::size_t stride = stride_for(known_frames, settings.max_app_samples);
    LabeledSamples app_data;
    app_data.input_size = settings.app_window * app_channels;
    std::vector<double> buf(app_data.input_size);
    std::size_t seen = 0;
    for (const auto &at : traces) {
        auto channels = app_channels_of(*at.trace);
        for (std::size_t m = 0; m < at.frame_app_labels.size(); ++m) {
            const int l = at.frame_app_labels[m];
            if (l < 0 || static_cast<std::size_t>(l) >= H) continue;
            if (seen++ % stride != 0) continue;
            write_app_window(channels, m, settings.app_window, buf);
            app_data.add(buf, static_cast<std::size_t>(l));
        }
    }
    tl.app_samples = app_data.size();
    tl.app_stride = stride;
    TcnModel app_model(settings.app_tcn, settings.app_window, app_channels, H);
    tl.app = tcn_train(app_model, app_data);
    bundle.app_openmax = fit_openmax(app_model, app_data, settings.openmax);
    bundle.app_model = std::move(app_model);

    // per-category action models
    struct Item {
        std::size_t trace;
        std::size_t burst;
        std::size_t action;
    };
    std::vector<std::vector<Item>> items(bundle.categories.size());
    std::vector<std::vector<BurstFeatures>> features(traces.size());
    std::vector<std::vector<BurstFeatures>> category_bursts(bundle.categories.size());
    for (std::size_t ti = 0; ti < traces.size(); ++ti) {
        const auto &at = traces[ti];
        features[ti] = trace_burst_features(*at.trace);
        auto bursts = burstify(*at.trace);
        for (std::size_t b = 0; b < bursts.size() && b < at.burst_action_labels.size(); ++b) {
            const int action = at.burst_action_labels[b];
            if (action < 0 || static_cast<std::size_t>(action) >= G) continue;
            std::span<const int> frame_labels(at.frame_app_labels);
            const int app = majority_label(frame_labels.subspan(bursts[b].first, bursts[b].size()));
            if (app < 0 || static_cast<std::size_t>(app) >= H) continue;
            const std::size_t c = bundle.app_category[static_cast<std::size_t>(app)];
            items[c].push_back({ti, b, static_cast<std::size_t>(action)});
            category_bursts[c].push_back(features[ti][b]);
        }
    }

    bundle.actions.resize(bundle.categories.size());
    tl.actions.assign(bundle.categories.size(), {});
    tl.action_samples.assign(bundle.categories.size(), 0);
    for (std::size_t c = 0; c < bundle.categories.size(); ++c) {
        if (items[c].empty()) continue;
        auto scaler = FeatureScaler::fit(category_bursts[c]);
        const std::size_t astride = stride_for(items[c].size(), settings.max_action_samples);
        LabeledSamples data;
        data.input_size = settings.action_window * burst_feature_count;
        std::map<std::size_t, std::vector<ActionSample>> cache;
        for (std::size_t i = 0; i < items[c].size(); i += astride) {
            const auto &it = items[c][i];
            auto found = cache.find(it.trace);
            if (found == cache.end()) {
                found = cache.emplace(it.trace, extract_action_samples(features[it.trace], settings.action_window, scaler))
                            .first;
            }
            data.add(found->second[it.burst].rows, it.action);
        }
        TcnConfig cfg = settings.action_tcn;
        cfg.seed = settings.action_tcn.seed + 1000 * (c + 1);
        TcnModel model(cfg, settings.action_window, burst_feature_count, G);
        tl.actions[c] = tcn_train(model, data);
        tl.action_samples[c] = data.size();
        auto om = fit_openmax(model, data, settings.openmax);
        bundle.actions[c] = ActionClassifier{bundle.categories[c], std::move(model), std::move(om), scaler};
    }
    bundle.validate();
    return bundle;
}

std::vector<int> predict_frame_apps(const TrafficTrace &trace, const ClassifierBundle &bundle, OpenSetMode mode) {
    const auto &model = *bundle.app_model;
    const std::size_t H = bundle.app_count();
    auto channels = app_channels_of(trace);
    std::vector<int> out(trace.size());
    constexpr std::size_t chunk = 256;
    std::vector<double> inputs;
    for (std::size_t s = 0; s < trace.size(); s += chunk) {
        const std::size_t n = std::min(chunk, trace.size() - s);
        inputs.resize(n * model.input_size());
        for (std::size_t i = 0; i < n; ++i) {
            write_app_window(channels, s + i, bundle.app_window,
                             std::span<double>(inputs).subspan(i * model.input_size(), model.input_size()));
        }
        auto logits = model.activations(inputs, n);
        decide_rows(logits, H, bundle.app_openmax, mode, std::span<int>(out).subspan(s, n));
    }
    return out;
}

std::vector<int> predict_burst_actions(const TrafficTrace &trace, std::span<const int> burst_apps,
                                       const ClassifierBundle &bundle, OpenSetMode mode) {
    std::vector<int> out(burst_apps.size(), unknown_label);
    std::vector<std::vector<std::size_t>> routed(bundle.categories.size());
    for (std::size_t b = 0; b < burst_apps.size(); ++b) {
        const int app = burst_apps[b];
        if (app < 0 || static_cast<std::size_t>(app) >= bundle.app_count()) continue;
        routed[bundle.app_category[static_cast<std::size_t>(app)]].push_back(b);
    }
    std::vector<BurstFeatures> features;
    for (std::size_t c = 0; c < routed.size(); ++c) {
        if (routed[c].empty() || !bundle.actions[c]) continue;
        if (features.empty()) features = trace_burst_features(trace);
        const auto &ac = *bundle.actions[c];
        auto samples = extract_action_samples(features, bundle.action_window, ac.scaler);
        const std::size_t D = ac.model.input_size();
        std::vector<double> inputs(routed[c].size() * D);
        for (std::size_t i = 0; i < routed[c].size(); ++i) {
            std::copy(samples[routed[c][i]].rows.begin(), samples[routed[c][i]].rows.end(),
                      inputs.begin() + static_cast<std::ptrdiff_t>(i * D));
        }
        auto logits = ac.model.activations(inputs, routed[c].size());
        std::vector<int> decided(routed[c].size());
        decide_rows(logits, ac.model.classes(), ac.openmax, mode, decided);
        for (std::size_t i = 0; i < routed[c].size(); ++i) out[routed[c][i]] = decided[i];
    }
    return out;
}

TracePrediction predict_trace(const TrafficTrace &trace, const ClassifierBundle &bundle, OpenSetMode mode) {
    TracePrediction p;
    p.frame_apps = predict_frame_apps(trace, bundle, mode);
    auto bursts = burstify(trace);
    p.burst_apps.reserve(bursts.size());
    std::span<const int> frames(p.frame_apps);
    for (const auto &b : bursts) p.burst_apps.push_back(majority_label(frames.subspan(b.first, b.size())));
    p.burst_actions = predict_burst_actions(trace, p.burst_apps, bundle, mode);
    return p;
}

std::vector<OperationLabel> operation_labels(const TracePrediction &prediction, const ClassifierBundle &bundle) {
    const std::size_t H = bundle.app_count();
    const std::size_t G = bundle.actions_per_category;
    std::vector<OperationLabel> out;
    out.reserve(prediction.burst_apps.size());
    for (std::size_t b = 0; b < prediction.burst_apps.size(); ++b) {
        const int app = prediction.burst_apps[b];
        const int action = prediction.burst_actions[b];
        out.push_back({onehot_encode(app < 0 ? H : static_cast<std::size_t>(app), H + 1),
                       onehot_encode(action < 0 ? G : static_cast<std::size_t>(action), G + 1)});
    }
    return out;
}

std::vector<OperationLabel> assemble_operation_sequence(const TrafficTrace &trace, const ClassifierBundle &bundle,
                                                        OpenSetMode mode) {
    return operation_labels(predict_trace(trace, bundle, mode), bundle);
}

}  // namespace macprint
