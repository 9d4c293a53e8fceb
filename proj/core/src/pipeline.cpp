#include "macprint/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace macprint {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &fn) {
    if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

CollectedData collected_from(const Scenario &scenario, const GeneratedScenario &gen) {
    CollectedData d;
    d.scenario = scenario;
    d.capture = gen.capture;
    d.logs = gen.logs;
    d.registry = device_registry(scenario, gen.truth);
    return d;
}

CollectedData load_collected(const std::filesystem::path &dir) {
    CollectedData d;
    d.scenario = load_scenario(dir / "scenario.txt");
    d.capture = parse_capture(dir / "capture.csv");
    {
        std::ifstream in(dir / "devices.txt");
        if (!in) throw Error("cannot open " + (dir / "devices.txt").string());
        d.registry = read_device_registry(in, (dir / "devices.txt").string());
    }
    for (const auto &user : d.registry.users) {
        auto log = parse_interaction_log(dir / "logs" / (user + ".log"));
        d.logs.push_back(std::move(log.records));
    }
    return d;
}

Scenario catalog_of(const RunConfig &cfg) {
    auto apps = default_catalog({cfg.catalog_apps, cfg.actions_per_app, cfg.catalog_seed, cfg.known_apps});
    return catalog_scenario(std::move(apps), {cfg.instances_per_app, cfg.instance_length, cfg.instance_gap}, cfg.seed);
}

std::vector<Scenario> rooms_of(const RunConfig &cfg) {
    auto apps = default_catalog({cfg.catalog_apps, cfg.actions_per_app, cfg.catalog_seed, cfg.known_apps});
    std::vector<Scenario> out;
    std::size_t first = 0;
    for (std::size_t r = 0; r < cfg.rooms.size(); ++r) {
        RoomPlan plan;
        plan.users = cfg.rooms[r];
        plan.days = cfg.room_days;
        plan.sessions_per_day = cfg.sessions_per_day;
        plan.session_length = cfg.session_length;
        plan.day_length = cfg.day_length;
        plan.first_primary_app = first;
        plan.known_apps = cfg.known_apps;
        first = (first + plan.users) % cfg.known_apps;
        MacAddress ap{{0x02, 0x00, 0x00, 0x00, 0x01, static_cast<std::uint8_t>(r + 1)}};
        out.push_back(room_scenario(apps, plan, ap, cfg.seed * 1000 + 17 * (r + 1)));
    }
    return out;
}

std::vector<std::string> known_app_names(const Scenario &scenario, std::size_t known) {
    std::vector<std::string> out;
    for (std::size_t a = 0; a < std::min(known, scenario.apps.size()); ++a) out.push_back(scenario.apps[a].name);
    return out;
}

std::vector<std::string> known_app_categories(const Scenario &scenario, std::size_t known) {
    std::vector<std::string> out;
    for (std::size_t a = 0; a < std::min(known, scenario.apps.size()); ++a) out.push_back(scenario.apps[a].category);
    return out;
}

TraceDataset build_traces(std::span<const FrameMeta> capture, const MacAddress &ap, const SegmenterConfig &cfg,
                          FilterReport *report) {
    auto data = filter_data_frames(capture, ap, report);
    return segment_traces(data, cfg);
}

std::vector<AnnotatedTrace> annotate_dataset(const TraceDataset &ds, const CollectedData &data) {
    std::map<MacAddress, std::size_t> owner(data.registry.entries.begin(), data.registry.entries.end());
    const auto table = data.scenario.mapping_table();
    const auto apps = data.scenario.app_names();
    std::vector<AnnotatedTrace> out;
    out.reserve(ds.traces.size());
    for (const auto &trace : ds.traces) {
        auto it = owner.find(trace.mac());
        if (it == owner.end() || it->second >= data.logs.size()) {
            out.push_back({&trace, std::vector<int>(trace.size(), unknown_label),
                           std::vector<int>(burst_count(trace), unknown_label)});
        } else {
            out.push_back(annotate_trace(trace, data.logs[it->second], table, apps));
        }
    }
    return out;
}

TraceSplit split_traces(std::span<const AnnotatedTrace> annotated, std::size_t known_apps, double train_fraction,
                        std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> strata;
    TraceSplit split;
    for (std::size_t i = 0; i < annotated.size(); ++i) {
        const int app = majority_label(annotated[i].frame_app_labels);
        if (app < 0) continue;
        if (static_cast<std::size_t>(app) >= known_apps) {
            split.withheld.push_back(i);
        } else {
            strata[app].push_back(i);
        }
    }
    std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
    for (auto &[app, idx] : strata) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<TraceInterval> intervals_of(const TraceDataset &ds, std::span<const std::size_t> indices) {
    std::vector<TraceInterval> out;
    for (auto i : indices) out.push_back({ds.traces[i].mac(), ds.traces[i].start(), ds.traces[i].end()});
    return out;
}

std::vector<std::size_t> traces_in(const TraceDataset &ds, std::span<const TraceInterval> intervals) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.traces.size(); ++i) {
        const auto &t = ds.traces[i];
        for (const auto &iv : intervals) {
            if (iv.mac == t.mac() && t.start() <= iv.end && iv.start <= t.end()) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

TrainingOutcome train_from(const CollectedData &data, const RunConfig &cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    auto ds = build_traces(data.capture, data.scenario.ap, cfg.segmenter);
    auto annotated = annotate_dataset(ds, data);
    auto split = split_traces(annotated, cfg.known_apps, cfg.train_fraction, cfg.seed);
    std::vector<AnnotatedTrace> train;
    for (auto i : split.train) train.push_back(annotated[i]);
    TrainingOutcome out;
    const auto names = known_app_names(data.scenario, cfg.known_apps);
    const auto cats = known_app_categories(data.scenario, cfg.known_apps);
    out.bundle = train_bundle(train, names, cats, cfg.classifier, &out.log);
    out.test_intervals = intervals_of(ds, split.test);
    out.withheld_intervals = intervals_of(ds, split.withheld);
    out.seconds = ms_since(t0) / 1000.0;
    return out;
}

std::vector<TracePrediction> predict_traces(const TraceDataset &ds, std::span<const std::size_t> indices,
                                            const ClassifierBundle &bundle, OpenSetMode mode, std::size_t workers) {
    std::vector<TracePrediction> out(indices.size());
    parallel_for(indices.size(), workers, [&](std::size_t i) { out[i] = predict_trace(ds.traces[indices[i]], bundle, mode); });
    return out;
}

TraceTruth trace_truth(const TrafficTrace &trace, const GroundTruth &truth) {
    TraceTruth t;
    std::vector<int> actions, users;
    for (const auto &f : trace.frames()) {
        if (f.id >= truth.frames.size()) throw Error("ground truth does not cover capture row " + std::to_string(f.id));
        const auto &ft = truth.frames[f.id];
        t.frame_apps.push_back(ft.app);
        actions.push_back(ft.action);
        users.push_back(ft.user);
    }
    std::span<const int> apps(t.frame_apps), acts(actions);
    for (const auto &b : burstify(trace)) {
        t.burst_apps.push_back(majority_label(apps.subspan(b.first, b.size())));
        t.burst_actions.push_back(majority_label(acts.subspan(b.first, b.size())));
    }
    t.user = majority_label(users);
    return t;
}

ClassificationScores score_predictions(std::span<const TracePrediction> predictions, std::span<const TraceTruth> truths,
                                       const ClassifierBundle &bundle, const Scenario &scenario) {
    if (predictions.size() != truths.size()) throw Error("score: prediction and truth counts differ");
    const int H = static_cast<int>(bundle.app_count());
    const int G = static_cast<int>(bundle.actions_per_category);
    const int C = static_cast<int>(bundle.categories.size());
    const int U_action = C * G;
    // scenario app index → bundle class, H for apps outside the bundle
    std::vector<int> to_bundle(scenario.apps.size(), H);
    for (std::size_t a = 0; a < scenario.apps.size(); ++a) {
        auto it = std::find(bundle.apps.begin(), bundle.apps.end(), scenario.apps[a].name);
        if (it != bundle.apps.end()) to_bundle[a] = static_cast<int>(it - bundle.apps.begin());
    }
    std::vector<int> at, ap, ct, cp;
    std::size_t withheld = 0, withheld_unknown = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto &p = predictions[i];
        const auto &t = truths[i];
        for (std::size_t m = 0; m < t.frame_apps.size(); ++m) {
            if (t.frame_apps[m] < 0) continue;
            const int truth_app = to_bundle[static_cast<std::size_t>(t.frame_apps[m])];
            const int pred_app = p.frame_apps[m] < 0 ? H : p.frame_apps[m];
            at.push_back(truth_app);
            ap.push_back(pred_app);
            if (truth_app == H) {
                ++withheld;
                withheld_unknown += pred_app == H;
            }
        }
        for (std::size_t b = 0; b < t.burst_apps.size(); ++b) {
            if (t.burst_apps[b] < 0 || t.burst_actions[b] < 0) continue;
            const int truth_app = to_bundle[static_cast<std::size_t>(t.burst_apps[b])];
            const int truth_class =
                truth_app == H ? U_action
                               : static_cast<int>(bundle.app_category[static_cast<std::size_t>(truth_app)]) * G +
                                     t.burst_actions[b];
            int pred_class = U_action;
            if (p.burst_apps[b] >= 0 && p.burst_actions[b] >= 0) {
                pred_class = static_cast<int>(bundle.app_category[static_cast<std::size_t>(p.burst_apps[b])]) * G +
                             p.burst_actions[b];
            }
            ct.push_back(truth_class);
            cp.push_back(pred_class);
        }
    }
    std::vector<std::string> app_names(bundle.apps);
    app_names.push_back("unknown");
    std::vector<std::string> action_names;
    for (const auto &c : bundle.categories) {
        for (int g = 0; g < G; ++g) action_names.push_back(c + "/" + std::to_string(g));
    }
    action_names.push_back("unknown");
    ClassificationScores s;
    s.apps = score_labels(at, ap, std::move(app_names), "app classification (per frame)");
    s.actions = score_labels(ct, cp, std::move(action_names), "action classification (per burst)");
    s.unknown_recall = withheld ? static_cast<double>(withheld_unknown) / static_cast<double>(withheld) : 0.0;
    if (withheld) s.apps.extras["unknown_recall"] = s.unknown_recall;
    return s;
}

EvalOutcome evaluate_capture(std::span<const FrameMeta> capture, const Scenario &scenario, const TrainingOutcome &trained,
                             const std::function<GroundTruth()> &load_truth, const RunConfig &cfg, bool open_world,
                             double loss_rate) {
    const auto t0 = Clock::now();
    std::vector<FrameMeta> lossy;
    if (loss_rate > 0) {
        lossy = inject_loss(capture, loss_rate, cfg.seed ^ 0x1055ULL);
        capture = lossy;
    }
    auto ds = build_traces(capture, scenario.ap, cfg.segmenter);
    auto selected = traces_in(ds, trained.test_intervals);
    if (open_world) {
        auto extra = traces_in(ds, trained.withheld_intervals);
        selected.insert(selected.end(), extra.begin(), extra.end());
        std::sort(selected.begin(), selected.end());
        selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
    }
    EvalOutcome out;
    out.traces = selected.size();
    auto om = predict_traces(ds, selected, trained.bundle, OpenSetMode::openmax, cfg.workers);
    auto sm = predict_traces(ds, selected, trained.bundle, OpenSetMode::softmax, cfg.workers);

    // inference is finished; ground truth is loaded from here on
    const GroundTruth truth = load_truth();
    std::vector<TraceTruth> truths;
    for (auto i : selected) truths.push_back(trace_truth(ds.traces[i], truth));
    out.openmax = score_predictions(om, truths, trained.bundle, scenario);
    out.softmax = score_predictions(sm, truths, trained.bundle, scenario);
    out.seconds = ms_since(t0) / 1000.0;
    return out;
}

std::vector<BehaviorSample> behavior_samples(const TraceDataset &ds, std::span<const std::size_t> indices,
                                             std::span<const TracePrediction> predictions,
                                             const ClassifierBundle &bundle, std::size_t w_b) {
    std::vector<BehaviorSample> out;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto ops = operation_labels(predictions[i], bundle);
        auto seq = collapse(ops, ds.traces[indices[i]].mac());
        auto windows = behavior_windows(seq, w_b, indices[i]);
        std::move(windows.begin(), windows.end(), std::back_inserter(out));
    }
    return out;
}

namespace {

void split_days(RoomPrediction &rp, const RunConfig &cfg, std::vector<std::size_t> &train_idx,
                std::vector<std::size_t> &test_idx) {
    for (std::size_t i = 0; i < rp.dataset.traces.size(); ++i) {
        const auto day = static_cast<std::size_t>(std::floor(rp.dataset.traces[i].start() / cfg.day_length));
        (day < cfg.room_train_days ? train_idx : test_idx).push_back(i);
    }
}

void identify_held_out(RoomPrediction &rp) {
    std::map<std::size_t, std::vector<BehaviorSample>> by_trace;
    for (const auto &s : rp.test) {
        rp.window_cluster.push_back(identify(s, rp.profiles));
        by_trace[s.source].push_back(s);
    }
    for (const auto &[trace, samples] : by_trace) rp.trace_cluster.emplace_back(trace, identify_majority(samples, rp.profiles));
}

}  // namespace

RoomPrediction profile_room(std::span<const FrameMeta> capture, const MacAddress &ap, const ClassifierBundle &bundle,
                            const RunConfig &cfg) {
    RoomPrediction rp;
    rp.dataset = build_traces(capture, ap, cfg.segmenter);
    std::vector<std::size_t> train_idx, test_idx;
    split_days(rp, cfg, train_idx, test_idx);
    auto train_pred = predict_traces(rp.dataset, train_idx, bundle, OpenSetMode::openmax, cfg.workers);
    auto test_pred = predict_traces(rp.dataset, test_idx, bundle, OpenSetMode::openmax, cfg.workers);
    rp.train = behavior_samples(rp.dataset, train_idx, train_pred, bundle, cfg.behavior_window);
    rp.test = behavior_samples(rp.dataset, test_idx, test_pred, bundle, cfg.behavior_window);
    if (rp.train.empty()) throw Error("no behavior samples in the profiling days");

    std::set<MacAddress> macs;
    for (const auto &s : rp.train) macs.insert(s.mac);
    rp.macs = macs.size();
    rp.k_max = std::min(cfg.k_max ? cfg.k_max : rp.macs, rp.train.size());
    rp.profiles = refresh_profiles(rp.train, cfg.refresh_window, rp.k_max, cfg.kmeans);
    const std::size_t refreshed_from = rp.train.size() - rp.profiles.assignment.size();
    for (std::size_t i = refreshed_from; i < rp.train.size(); ++i) rp.member_macs.push_back(rp.train[i].mac);
    identify_held_out(rp);
    return rp;
}

RoomPrediction identify_room(std::span<const FrameMeta> capture, const MacAddress &ap, const ClassifierBundle &bundle,
                             const UserProfileSet &profiles, std::vector<MacAddress> member_macs, const RunConfig &cfg) {
    if (profiles.centroids.empty()) throw Error("identify_room: no profiles");
    RoomPrediction rp;
    rp.dataset = build_traces(capture, ap, cfg.segmenter);
    std::vector<std::size_t> train_idx, test_idx;
    split_days(rp, cfg, train_idx, test_idx);
    auto test_pred = predict_traces(rp.dataset, test_idx, bundle, OpenSetMode::openmax, cfg.workers);
    rp.test = behavior_samples(rp.dataset, test_idx, test_pred, bundle, cfg.behavior_window);
    for (const auto &s : rp.test) {
        if (s.flat.size() != profiles.flat_bits) throw Error("identify_room: profiles were built with another window");
    }
    rp.profiles = profiles;
    rp.member_macs = std::move(member_macs);
    std::set<MacAddress> macs(rp.member_macs.begin(), rp.member_macs.end());
    rp.macs = macs.size();
    identify_held_out(rp);
    return rp;
}

RoomOutcome score_room(const RoomPrediction &rp, const GroundTruth &truth, std::size_t users) {
    RoomOutcome out;
    out.true_users = users;
    out.macs = rp.macs;
    out.k_max = rp.k_max;
    out.profiles = rp.profiles;
    out.train_samples = rp.train.size();
    out.test_samples = rp.test.size();
    const std::size_t k = rp.profiles.centroids.size();
    // clusters are named after the majority true user of their training members
    std::vector<std::vector<int>> members(k);
    if (rp.member_macs.size() != rp.profiles.assignment.size()) {
        throw Error("score_room: member list does not match the profile assignment");
    }
    for (std::size_t i = 0; i < rp.member_macs.size(); ++i) {
        members[rp.profiles.assignment[i]].push_back(truth.user_of(rp.member_macs[i]));
    }
    for (const auto &m : members) out.cluster_user.push_back(majority_label(m));

    auto user_class = [&](int u) { return u < 0 || static_cast<std::size_t>(u) >= users ? static_cast<int>(users) : u; };
    std::vector<std::string> names;
    for (std::size_t u = 0; u < users; ++u) names.push_back("user" + std::to_string(u));
    names.push_back("none");
    std::vector<int> wt, wp;
    for (std::size_t i = 0; i < rp.test.size(); ++i) {
        wt.push_back(user_class(truth.user_of(rp.test[i].mac)));
        wp.push_back(user_class(out.cluster_user[rp.window_cluster[i]]));
    }
    out.windows = score_labels(wt, wp, names, "user identification (per window)");
    std::vector<int> tt, tp;
    for (const auto &[trace, cluster] : rp.trace_cluster) {
        tt.push_back(user_class(truth.user_of(rp.dataset.traces[trace].mac())));
        tp.push_back(user_class(out.cluster_user[cluster]));
    }
    out.traces = score_labels(tt, tp, names, "user identification (per trace, majority vote)");
    out.windows.extras["k_op"] = static_cast<double>(rp.profiles.k_op);
    out.windows.extras["true_users"] = static_cast<double>(users);
    return out;
}

std::vector<StageRuntime> measure_runtime(std::span<const FrameMeta> capture, const MacAddress &ap,
                                          const ClassifierBundle &bundle, const RunConfig &cfg,
                                          std::size_t min_samples) {
    // smallest capture prefix whose traces hold min_samples frames
    std::size_t rows = std::min<std::size_t>(capture.size(), std::max<std::size_t>(1024, min_samples * 2));
    TraceDataset ds;
    std::size_t frames = 0;
    for (;;) {
        ds = build_traces(capture.first(rows), ap, cfg.segmenter);
        frames = 0;
        for (const auto &t : ds.traces) frames += t.size();
        if (frames >= min_samples || rows == capture.size()) break;
        rows = std::min(capture.size(), rows * 2);
    }
    if (frames == 0) throw Error("runtime: capture holds no traffic traces");
    auto prefix = capture.first(rows);

    std::vector<StageRuntime> out;
    auto stage = [&](const std::string &name, auto &&fn) {
        const auto t0 = Clock::now();
        fn();
        out.push_back({name, frames, ms_since(t0)});
    };
    stage("ingest", [&] { ds = build_traces(prefix, ap, cfg.segmenter); });

    const auto &model = *bundle.app_model;
    std::vector<std::vector<double>> inputs(ds.traces.size());
    stage("app_features", [&] {
        for (std::size_t i = 0; i < ds.traces.size(); ++i) {
            auto channels = app_channels_of(ds.traces[i]);
            inputs[i].resize(ds.traces[i].size() * model.input_size());
            for (std::size_t m = 0; m < ds.traces[i].size(); ++m) {
                write_app_window(channels, m, bundle.app_window,
                                 std::span<double>(inputs[i]).subspan(m * model.input_size(), model.input_size()));
            }
        }
    });
    std::vector<TracePrediction> pred(ds.traces.size());
    stage("app_classifier", [&] {
        for (std::size_t i = 0; i < ds.traces.size(); ++i) {
            auto logits = model.activations(inputs[i], ds.traces[i].size());
            auto &labels = pred[i].frame_apps;
            labels.resize(ds.traces[i].size());
            for (std::size_t m = 0; m < labels.size(); ++m) {
                auto row = std::span<const double>(logits).subspan(m * model.classes(), model.classes());
                auto qhat = openmax_calibrate(softmax(row), row, bundle.app_openmax);
                auto d = openmax_decide(qhat, bundle.app_openmax.cfg.delta);
                labels[m] = d == model.classes() ? unknown_label : static_cast<int>(d);
            }
        }
    });
    stage("action_classifier", [&] {
        for (std::size_t i = 0; i < ds.traces.size(); ++i) {
            std::span<const int> f(pred[i].frame_apps);
            for (const auto &b : burstify(ds.traces[i])) pred[i].burst_apps.push_back(majority_label(f.subspan(b.first, b.size())));
            pred[i].burst_actions = predict_burst_actions(ds.traces[i], pred[i].burst_apps, bundle);
        }
    });
    std::vector<std::size_t> all(ds.traces.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<BehaviorSample> samples;
    stage("behavior", [&] { samples = behavior_samples(ds, all, pred, bundle, cfg.behavior_window); });

    // profiles fitted on these samples stand in for trained ones; fitting is
    // not an inference stage and is not timed
    UserProfileSet profiles;
    if (samples.size() >= 2) {
        profiles = kmeans_hamming(samples, 2, cfg.kmeans);
    }
    stage("identify", [&] {
        volatile std::size_t sink = 0;
        if (!profiles.centroids.empty()) {
            for (const auto &s : samples) sink = sink + identify(s, profiles);
        }
    });

    const auto t0 = Clock::now();
    {
        auto ds2 = build_traces(prefix, ap, cfg.segmenter);
        std::vector<TracePrediction> p2;
        for (const auto &t : ds2.traces) p2.push_back(predict_trace(t, bundle));
        auto s2 = behavior_samples(ds2, all, p2, bundle, cfg.behavior_window);
        volatile std::size_t sink = 0;
        if (!profiles.centroids.empty()) {
            for (const auto &s : s2) sink = sink + identify(s, profiles);
        }
    }
    out.push_back({"total", frames, ms_since(t0)});
    return out;
}

}  // namespace macprint
