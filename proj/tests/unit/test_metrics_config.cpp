#include <doctest.h>

#include <random>
#include <sstream>

#include "macprint/metrics.hpp"
#include "macprint/run_config.hpp"

using namespace macprint;

TEST_CASE("scores on a hand-made confusion") {
    std::vector<int> truth{0, 0, 0, 1, 1, 2};
    std::vector<int> pred{0, 0, 1, 1, 1, 0};
    auto r = score_labels(truth, pred, {"a", "b", "c"});
    CHECK(r.samples == 6);
    CHECK(r.accuracy == doctest::Approx(4.0 / 6));
    CHECK(r.confusion[0][1] == 1);
    CHECK(r.confusion[2][0] == 1);
    CHECK(r.per_class[0].precision == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[0].recall == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3));
    CHECK(r.per_class[1].recall == doctest::Approx(1.0));
    CHECK(r.per_class[2].f1 == 0);
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 3 + 0.8 + 0) / 3));
    CHECK_THROWS_AS(score_labels(truth, std::vector<int>{0}, {"a", "b", "c"}), Error);
    CHECK_THROWS_AS(score_labels(std::vector<int>{3}, std::vector<int>{0}, {"a", "b", "c"}), Error);
}

TEST_CASE("confusion rows sum to class support") {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const int k = 2 + static_cast<int>(rng() % 8);
        std::vector<int> t(200), p(200);
        for (auto &v : t) v = static_cast<int>(rng() % static_cast<unsigned>(k));
        for (auto &v : p) v = static_cast<int>(rng() % static_cast<unsigned>(k));
        std::vector<std::string> names;
        for (int i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
        auto r = score_labels(t, p, names);
        std::size_t diag = 0;
        for (int c = 0; c < k; ++c) {
            std::size_t row = 0, col = 0;
            for (int j = 0; j < k; ++j) {
                row += r.confusion[c][j];
                col += r.confusion[j][c];
            }
            CHECK(row == r.per_class[c].support);
            CHECK(col == r.per_class[c].predicted);
            diag += r.confusion[c][c];
        }
        CHECK(r.accuracy == doctest::Approx(static_cast<double>(diag) / 200));
    }
}

TEST_CASE("metrics JSON round-trip and text output") {
    std::vector<int> truth{0, 1, 1, 2};
    std::vector<int> pred{0, 1, 2, 2};
    auto r = score_labels(truth, pred, {"x", "y", "z"}, "demo");
    r.runtimes.push_back({"features", 10, 4.0});
    r.extras["unknown_recall"] = 0.5;
    auto back = metrics_from_json(metrics_json(r));
    CHECK(back.title == "demo");
    CHECK(back.confusion == r.confusion);
    CHECK(back.accuracy == doctest::Approx(r.accuracy));
    CHECK(back.runtimes.size() == 1);
    CHECK(back.runtimes[0].ms_per_sample() == doctest::Approx(0.4));
    CHECK(back.extras.at("unknown_recall") == 0.5);
    auto text = format_report(r);
    CHECK(text.find("demo") != std::string::npos);
    CHECK(text.find("features") != std::string::npos);

    auto table = format_table({{"name", "value"}, {"alpha", "1"}, {"b", "22"}});
    CHECK(table == "name   value\n"
                   "------------\n"
                   "alpha      1\n"
                   "b         22\n");
}

TEST_CASE("config dump and parse are inverse") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.rooms = {2, 7};
    cfg.loss_rate = 0.15;
    cfg.open_world = true;
    cfg.classifier.app_tcn.channels = 17;
    cfg.segmenter.gamma = 2.5;
    auto text = dump_run_config(cfg);
    std::istringstream in(text);
    auto back = parse_run_config(in);
    CHECK(back == cfg);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);
    cfg.seed = 100;
    CHECK(config_hash(back) != config_hash(cfg));
}

TEST_CASE("config parse errors") {
    std::istringstream unknown("seed = 1\nno_such_key = 3\n");
    CHECK_THROWS_AS(parse_run_config(unknown), Error);
    std::istringstream bad_value("seed = banana\n");
    CHECK_THROWS_AS(parse_run_config(bad_value), Error);
    std::istringstream partial("# comment\n\nseed = 5\n");
    auto cfg = parse_run_config(partial);
    CHECK(cfg.seed == 5);
    CHECK(cfg.behavior_window == RunConfig{}.behavior_window);
    RunConfig bad;
    bad.loss_rate = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}
