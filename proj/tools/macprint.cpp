// macprint: command-line front end for the fingerprinting pipeline.
//
//   macprint generate  synthetic catalog capture and room captures
//   macprint train     app/action classifiers on the catalog capture
//   macprint eval      closed- or open-world scores on the held-out traces
//   macprint profile   behavior profiles per room from the profiling days
//   macprint identify  held-out days against the stored profiles
//   macprint runtime   per-stage inference cost
//
// All artifacts live under --out (default: the config's workdir).  Every
// run leaves manifest-<command>.json next to them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "macprint/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace macprint;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool open_world = false;
    std::optional<double> loss_rate;
    std::string out;
};

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Run {
public:
    Run(std::string command, const Options &opt) : command_{std::move(command)}, started_{utc_now()} {
        cfg_ = opt.config.empty() ? RunConfig{} : load_run_config(opt.config);
        if (opt.seed) cfg_.seed = *opt.seed;
        if (opt.open_world) cfg_.open_world = true;
        if (opt.loss_rate) cfg_.loss_rate = *opt.loss_rate;
        cfg_.validate();
        dir_ = opt.out.empty() ? fs::path(cfg_.workdir) : fs::path(opt.out);
        fs::create_directories(dir_);
        config_path_ = opt.config;
    }

    const RunConfig &cfg() const { return cfg_; }
    const fs::path &dir() const { return dir_; }

    fs::path input(const fs::path &p) {
        if (!fs::exists(p)) throw Error("missing " + p.string() + " (run the earlier subcommand first)");
        inputs_.push_back(p);
        return p;
    }
    fs::path output(const fs::path &p) {
        fs::create_directories(p.parent_path());
        outputs_.push_back(p);
        return p;
    }
    void write_text(const fs::path &p, const std::string &text) {
        std::ofstream out(output(p));
        if (!out) throw Error("cannot write " + p.string());
        out << text;
    }
    void result(const std::string &key, json value) { results_[key] = std::move(value); }
    /// manifest-<name>.json; defaults to the subcommand
    void manifest_name(std::string name) { manifest_name_ = std::move(name); }

    void finish() {
        const double seconds = std::chrono::duration<double>(Clock::now() - t0_).count();
        json m;
        m["tool"] = "macprint";
        m["version"] = MACPRINT_VERSION;
        m["command"] = command_;
        m["started"] = started_;
        m["finished"] = utc_now();
        m["seconds"] = seconds;
        m["compiler"] = __VERSION__;
        m["bundle_format"] = bundle_format_version;
        m["config_file"] = config_path_;
        m["config_hash"] = config_hash(cfg_);
        m["seeds"] = {{"run", cfg_.seed},
                      {"catalog", cfg_.catalog_seed},
                      {"app_tcn", cfg_.classifier.app_tcn.seed},
                      {"action_tcn", cfg_.classifier.action_tcn.seed},
                      {"kmeans", cfg_.kmeans.seed}};
        json config = json::object();
        std::istringstream dump(dump_run_config(cfg_));
        for (std::string line; std::getline(dump, line);) {
            auto eq = line.find(" = ");
            if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 3);
        }
        m["config"] = config;
        auto files = [](const std::vector<fs::path> &paths) {
            json a = json::array();
            for (const auto &p : paths) {
                std::error_code ec;
                auto size = fs::is_regular_file(p, ec) ? fs::file_size(p, ec) : 0;
                a.push_back({{"path", p.string()}, {"bytes", size}});
            }
            return a;
        };
        m["inputs"] = files(inputs_);
        m["outputs"] = files(outputs_);
        m["results"] = results_;
        std::ofstream out(dir_ / ("manifest-" + (manifest_name_.empty() ? command_ : manifest_name_) + ".json"));
        out << m.dump(2) << '\n';
    }

private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    std::string started_;
    Clock::time_point t0_ = Clock::now();
    RunConfig cfg_;
    fs::path dir_;
    std::string config_path_;
    std::string manifest_name_;
    std::vector<fs::path> inputs_, outputs_;
    json results_ = json::object();
};

fs::path catalog_dir(const Run &run) { return run.dir() / "data" / "catalog"; }
fs::path room_dir(const Run &run, std::size_t r) { return run.dir() / "data" / ("room" + std::to_string(r)); }

GroundTruth load_truth(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_ground_truth(in);
}

json intervals_json(const std::vector<TraceInterval> &v) {
    json a = json::array();
    for (const auto &iv : v) a.push_back({{"mac", iv.mac.str()}, {"start", iv.start}, {"end", iv.end}});
    return a;
}

std::vector<TraceInterval> intervals_from(const json &a) {
    std::vector<TraceInterval> v;
    for (const auto &e : a) {
        v.push_back({MacAddress::parse(e.at("mac").get<std::string>()), e.at("start").get<double>(),
                     e.at("end").get<double>()});
    }
    return v;
}

TrainingOutcome load_trained(Run &run) {
    TrainingOutcome t;
    t.bundle = read_bundle(run.input(run.dir() / "model" / "bundle.bin"));
    std::ifstream in(run.input(run.dir() / "model" / "split.json"));
    auto j = json::parse(in);
    t.test_intervals = intervals_from(j.at("test"));
    t.withheld_intervals = intervals_from(j.at("withheld"));
    return t;
}

std::string fixed(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void report(Run &run, const fs::path &stem, const MetricsReport &r) {
    run.write_text(stem.string() + ".json", metrics_json(r) + "\n");
    run.write_text(stem.string() + ".txt", format_report(r));
}

// ---------------------------------------------------------------------------

void cmd_generate(Run &run) {
    const auto &cfg = run.cfg();
    run.write_text(run.dir() / "config.txt", dump_run_config(cfg));
    std::vector<std::vector<std::string>> rows{{"dataset", "users", "apps", "capture rows", "frames with app"}};
    auto emit = [&](const std::string &name, const fs::path &dir, const Scenario &sc) {
        auto gen = generate_scenario(sc);
        write_generated(dir, sc, gen);
        for (const auto &f : {"scenario.txt", "capture.csv", "devices.txt", "truth.jsonl"}) run.output(dir / f);
        std::size_t labelled = 0;
        for (const auto &f : gen.truth.frames) labelled += f.app >= 0;
        rows.push_back({name, std::to_string(sc.users.size()), std::to_string(sc.apps.size()),
                        std::to_string(gen.capture.size()), std::to_string(labelled)});
        run.result(name, {{"rows", gen.capture.size()}, {"users", sc.users.size()}});
    };
    emit("catalog", catalog_dir(run), catalog_of(cfg));
    auto rooms = rooms_of(cfg);
    for (std::size_t r = 0; r < rooms.size(); ++r) emit("room" + std::to_string(r), room_dir(run, r), rooms[r]);
    std::cout << format_table(rows);
}

void cmd_train(Run &run) {
    const auto &cfg = run.cfg();
    auto data = load_collected(run.input(catalog_dir(run)));
    auto trained = train_from(data, cfg);
    write_bundle(run.output(run.dir() / "model" / "bundle.bin"), trained.bundle);
    json split{{"test", intervals_json(trained.test_intervals)},
               {"withheld", intervals_json(trained.withheld_intervals)}};
    run.write_text(run.dir() / "model" / "split.json", split.dump(2) + "\n");

    json log;
    auto report_json = [](const TrainReport &r) {
        return json{{"initial_loss", r.initial_loss}, {"epoch_loss", r.epoch_loss},
                    {"validation_accuracy", r.validation_accuracy}};
    };
    log["seconds"] = trained.seconds;
    log["app"] = report_json(trained.log.app);
    log["app_samples"] = trained.log.app_samples;
    log["app_stride"] = trained.log.app_stride;
    std::vector<std::vector<std::string>> rows{{"model", "samples", "initial loss", "final loss", "validation acc"}};
    auto row = [&](const std::string &name, std::size_t n, const TrainReport &r) {
        rows.push_back({name, std::to_string(n), fixed(r.initial_loss),
                        r.epoch_loss.empty() ? "-" : fixed(r.epoch_loss.back()),
                        r.validation_accuracy.empty() ? "-" : fixed(r.validation_accuracy.back())});
    };
    row("app", trained.log.app_samples, trained.log.app);
    for (std::size_t c = 0; c < trained.log.actions.size(); ++c) {
        const auto &name = trained.bundle.categories[c];
        log["actions"][name] = report_json(trained.log.actions[c]);
        log["actions"][name]["samples"] = trained.log.action_samples[c];
        row("action/" + name, trained.log.action_samples[c], trained.log.actions[c]);
    }
    run.write_text(run.dir() / "model" / "training.json", log.dump(2) + "\n");
    run.write_text(run.dir() / "model" / "training.txt", format_table(rows));
    run.result("seconds", trained.seconds);
    run.result("test_traces", trained.test_intervals.size());
    run.result("withheld_traces", trained.withheld_intervals.size());
    std::cout << format_table(rows) << "trained in " << fixed(trained.seconds, 1) << " s\n";
}

void cmd_eval(Run &run) {
    const auto &cfg = run.cfg();
    auto trained = load_trained(run);
    auto data = load_collected(run.input(catalog_dir(run)));
    const auto truth_path = run.input(catalog_dir(run) / "truth.jsonl");
    auto ev = evaluate_capture(
        data.capture, data.scenario, trained, [&] { return load_truth(truth_path); }, cfg, cfg.open_world,
        cfg.loss_rate);

    std::string name = cfg.open_world ? "eval-open" : "eval-closed";
    if (cfg.loss_rate > 0) name += "-loss" + std::to_string(static_cast<int>(std::lround(cfg.loss_rate * 100)));
    const fs::path dir = run.dir() / name;
    run.manifest_name(name);
    report(run, dir / "apps_openmax", ev.openmax.apps);
    report(run, dir / "actions_openmax", ev.openmax.actions);
    report(run, dir / "apps_argmax", ev.softmax.apps);
    report(run, dir / "actions_argmax", ev.softmax.actions);

    std::vector<std::vector<std::string>> rows{{"decision", "app acc", "app macro F1", "action acc", "unknown recall"}};
    for (const auto &[name, s] : {std::pair<std::string, const ClassificationScores &>{"openmax", ev.openmax},
                                  {"argmax", ev.softmax}}) {
        rows.push_back({name, fixed(s.apps.accuracy), fixed(s.apps.macro_f1), fixed(s.actions.accuracy),
                        cfg.open_world ? fixed(s.unknown_recall) : "-"});
        run.result(name, {{"app_accuracy", s.apps.accuracy},
                          {"action_accuracy", s.actions.accuracy},
                          {"unknown_recall", s.unknown_recall}});
    }
    run.result("traces", ev.traces);
    run.result("loss_rate", cfg.loss_rate);
    run.write_text(dir / "summary.txt", format_table(rows));
    std::cout << (cfg.open_world ? "open world" : "closed world") << ", " << ev.traces << " traces, loss rate "
              << cfg.loss_rate << "\n"
              << format_table(rows);
}

std::string curve_text(const std::vector<double> &curve) {
    std::vector<std::vector<std::string>> rows{{"k", "silhouette"}};
    for (std::size_t i = 0; i < curve.size(); ++i) rows.push_back({std::to_string(i + 2), fixed(curve[i])});
    return format_table(rows);
}

void cmd_profile(Run &run) {
    const auto &cfg = run.cfg();
    auto bundle = read_bundle(run.input(run.dir() / "model" / "bundle.bin"));
    std::vector<std::vector<std::string>> rows{{"room", "users", "MACs", "samples", "k_max", "k_op", "silhouette"}};
    for (std::size_t r = 0; r < cfg.rooms.size(); ++r) {
        auto data = load_collected(run.input(room_dir(run, r)));
        auto rp = profile_room(data.capture, data.scenario.ap, bundle, cfg);
        json j;
        j["profiles"] = json::parse(profiles_json(rp.profiles));
        json macs = json::array();
        for (const auto &m : rp.member_macs) macs.push_back(m.str());
        j["member_macs"] = macs;
        j["k_max"] = rp.k_max;
        const std::string name = "room" + std::to_string(r);
        run.write_text(run.dir() / "profiles" / (name + ".json"), j.dump(2) + "\n");
        run.write_text(run.dir() / "profiles" / (name + "_silhouette.txt"), curve_text(rp.profiles.silhouette_curve));
        const auto k = rp.profiles.k_op;
        const double s = k >= 2 && k - 2 < rp.profiles.silhouette_curve.size() ? rp.profiles.silhouette_curve[k - 2] : 0.0;
        rows.push_back({name, std::to_string(data.scenario.users.size()), std::to_string(rp.macs),
                        std::to_string(rp.train.size()), std::to_string(rp.k_max), std::to_string(k), fixed(s)});
        run.result(name, {{"users", data.scenario.users.size()}, {"k_op", k}, {"silhouette", s}});
    }
    run.write_text(run.dir() / "profiles" / "summary.txt", format_table(rows));
    std::cout << format_table(rows);
}

void cmd_identify(Run &run) {
    const auto &cfg = run.cfg();
    auto bundle = read_bundle(run.input(run.dir() / "model" / "bundle.bin"));
    std::vector<std::vector<std::string>> rows{{"room", "user", "windows", "window acc", "traces", "trace acc"}};
    std::size_t correct = 0, total = 0;
    for (std::size_t r = 0; r < cfg.rooms.size(); ++r) {
        const std::string name = "room" + std::to_string(r);
        std::ifstream in(run.input(run.dir() / "profiles" / (name + ".json")));
        auto j = json::parse(in);
        auto profiles = profiles_from_json(j.at("profiles").dump());
        std::vector<MacAddress> members;
        for (const auto &m : j.at("member_macs")) members.push_back(MacAddress::parse(m.get<std::string>()));

        auto data = load_collected(run.input(room_dir(run, r)));
        auto rp = identify_room(data.capture, data.scenario.ap, bundle, profiles, std::move(members), cfg);
        // inference done; scoring below reads the ground truth
        auto truth = load_truth(run.input(room_dir(run, r) / "truth.jsonl"));
        auto outcome = score_room(rp, truth, data.scenario.users.size());
        report(run, run.dir() / "identify" / (name + "_windows"), outcome.windows);
        report(run, run.dir() / "identify" / (name + "_traces"), outcome.traces);
        for (std::size_t u = 0; u < outcome.true_users; ++u) {
            const auto &w = outcome.windows.per_class[u];
            const auto &t = outcome.traces.per_class[u];
            rows.push_back({name, data.scenario.users[u].name, std::to_string(w.support), fixed(w.recall),
                            std::to_string(t.support), fixed(t.recall)});
        }
        correct += static_cast<std::size_t>(std::lround(outcome.windows.accuracy * static_cast<double>(outcome.windows.samples)));
        total += outcome.windows.samples;
        run.result(name, {{"window_accuracy", outcome.windows.accuracy}, {"trace_accuracy", outcome.traces.accuracy}});
    }
    const double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    run.result("window_accuracy", acc);
    run.write_text(run.dir() / "identify" / "per_user.txt", format_table(rows));
    std::cout << format_table(rows) << "overall per-window accuracy " << fixed(acc) << " over " << total
              << " held-out windows\n";
}

void cmd_runtime(Run &run) {
    const auto &cfg = run.cfg();
    auto bundle = read_bundle(run.input(run.dir() / "model" / "bundle.bin"));
    auto data = load_collected(run.input(catalog_dir(run)));
    auto stages = measure_runtime(data.capture, data.scenario.ap, bundle, cfg, cfg.runtime_samples);
    std::vector<std::vector<std::string>> rows{{"stage", "samples", "total ms", "ms/sample"}};
    json j = json::array();
    for (const auto &s : stages) {
        rows.push_back({s.stage, std::to_string(s.samples), fixed(s.total_ms, 2), fixed(s.ms_per_sample())});
        j.push_back({{"stage", s.stage}, {"samples", s.samples}, {"total_ms", s.total_ms},
                     {"ms_per_sample", s.ms_per_sample()}});
    }
    run.write_text(run.dir() / "runtime" / "runtime.json", j.dump(2) + "\n");
    run.write_text(run.dir() / "runtime" / "runtime.txt", format_table(rows));
    run.result("stages", j);
    std::cout << format_table(rows);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Wi-Fi MAC-layer app, action and user fingerprinting on frame metadata"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MACPRINT_VERSION);

    Options opt;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", opt.config, "key = value run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "override the run seed");
        sub->add_flag("--open-world", opt.open_world, "include traces of withheld apps");
        sub->add_option("--loss-rate", opt.loss_rate, "drop this fraction of frames before evaluation")
            ->check(CLI::Range(0.0, 0.99));
        sub->add_option("--out", opt.out, "working directory (default: config workdir)");
    };

    using Handler = void (*)(Run &);
    const std::pair<const char *, std::pair<const char *, Handler>> commands[] = {
        {"generate", {"write synthetic catalog and room captures", cmd_generate}},
        {"train", {"train the app and action classifiers", cmd_train}},
        {"eval", {"score held-out traces (closed or open world)", cmd_eval}},
        {"profile", {"build user profiles from the profiling days", cmd_profile}},
        {"identify", {"identify users on the held-out days", cmd_identify}},
        {"runtime", {"measure per-stage inference time", cmd_runtime}},
    };
    std::vector<std::pair<CLI::App *, Handler>> subs;
    for (const auto &[name, entry] : commands) {
        auto *sub = app.add_subcommand(name, entry.first);
        add_common(sub);
        subs.emplace_back(sub, entry.second);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto &[sub, handler] : subs) {
            if (!sub->parsed()) continue;
            Run run(sub->get_name(), opt);
            handler(run);
            run.finish();
        }
    } catch (const std::exception &e) {
        std::cerr << "macprint: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
