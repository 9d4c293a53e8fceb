#include "macprint/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "macprint/trace_model.hpp"

namespace macprint {

MetricsReport score_labels(std::span<const int> truth, std::span<const int> predicted,
                           std::vector<std::string> class_names, std::string title) {
    if (truth.size() != predicted.size()) throw Error("score: truth and prediction lengths differ");
    const std::size_t C = class_names.size();
    MetricsReport r;
    r.title = std::move(title);
    r.class_names = std::move(class_names);
    r.confusion.assign(C, std::vector<std::size_t>(C, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= C ||
            static_cast<std::size_t>(predicted[i]) >= C) {
            throw Error("score: label out of range");
        }
        ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
        correct += truth[i] == predicted[i];
    }
    r.samples = truth.size();
    r.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());

    double f1_sum = 0;
    std::size_t f1_classes = 0;
    for (std::size_t c = 0; c < C; ++c) {
        ClassMetrics m;
        m.name = r.class_names[c];
        for (std::size_t k = 0; k < C; ++k) {
            m.support += r.confusion[c][k];
            m.predicted += r.confusion[k][c];
        }
        const double tp = static_cast<double>(r.confusion[c][c]);
        m.precision = m.predicted ? tp / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.support || m.predicted) {
            f1_sum += m.f1;
            ++f1_classes;
        }
        r.per_class.push_back(std::move(m));
    }
    r.macro_f1 = f1_classes ? f1_sum / static_cast<double>(f1_classes) : 0.0;
    return r;
}

std::string metrics_json(const MetricsReport &r, int indent) {
    nlohmann::json j;
    j["title"] = r.title;
    j["samples"] = r.samples;
    j["accuracy"] = r.accuracy;
    j["macro_f1"] = r.macro_f1;
    j["classes"] = r.class_names;
    j["confusion"] = r.confusion;
    auto &pc = j["per_class"] = nlohmann::json::array();
    for (const auto &m : r.per_class) {
        pc.push_back({{"name", m.name},
                      {"support", m.support},
                      {"predicted", m.predicted},
                      {"precision", m.precision},
                      {"recall", m.recall},
                      {"f1", m.f1}});
    }
    auto &rt = j["runtime"] = nlohmann::json::array();
    for (const auto &s : r.runtimes) {
        rt.push_back({{"stage", s.stage}, {"samples", s.samples}, {"total_ms", s.total_ms},
                      {"ms_per_sample", s.ms_per_sample()}});
    }
    j["extras"] = r.extras;
    return j.dump(indent);
}

MetricsReport metrics_from_json(const std::string &text) {
    auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.title = j.at("title").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    for (const auto &m : j.at("per_class")) {
        r.per_class.push_back({m.at("name").get<std::string>(), m.at("support").get<std::size_t>(),
                               m.at("predicted").get<std::size_t>(), m.at("precision").get<double>(),
                               m.at("recall").get<double>(), m.at("f1").get<double>()});
    }
    for (const auto &s : j.at("runtime")) {
        r.runtimes.push_back({s.at("stage").get<std::string>(), s.at("samples").get<std::size_t>(),
                              s.at("total_ms").get<double>()});
    }
    r.extras = j.at("extras").get<std::map<std::string, double>>();
    return r;
}

std::string format_table(const std::vector<std::vector<std::string>> &rows) {
    std::vector<std::size_t> width;
    for (const auto &row : rows) {
        if (row.size() > width.size()) width.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (c) out << "  ";
            // first column left-aligned, numbers right-aligned
            if (c == 0) {
                out << rows[r][c] << std::string(width[c] - rows[r][c].size(), ' ');
            } else {
                out << std::string(width[c] - rows[r][c].size(), ' ') << rows[r][c];
            }
        }
        out << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        }
    }
    return out.str();
}

namespace {

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string format_report(const MetricsReport &r) {
    std::ostringstream out;
    if (!r.title.empty()) out << r.title << '\n';
    out << "samples   " << r.samples << '\n';
    out << "accuracy  " << fixed(r.accuracy) << '\n';
    out << "macro F1  " << fixed(r.macro_f1) << '\n';
    for (const auto &[k, v] : r.extras) out << k << "  " << fixed(v) << '\n';
    out << '\n';

    std::vector<std::vector<std::string>> rows{{"class", "support", "predicted", "precision", "recall", "f1"}};
    for (const auto &m : r.per_class) {
        rows.push_back({m.name, std::to_string(m.support), std::to_string(m.predicted), fixed(m.precision),
                        fixed(m.recall), fixed(m.f1)});
    }
    out << format_table(rows) << '\n';

    if (!r.confusion.empty()) {
        std::vector<std::vector<std::string>> cm{{"truth \\ predicted"}};
        for (const auto &n : r.class_names) cm[0].push_back(n);
        for (std::size_t i = 0; i < r.confusion.size(); ++i) {
            std::vector<std::string> row{r.class_names[i]};
            for (auto v : r.confusion[i]) row.push_back(std::to_string(v));
            cm.push_back(std::move(row));
        }
        out << format_table(cm) << '\n';
    }
    if (!r.runtimes.empty()) {
        std::vector<std::vector<std::string>> rt{{"stage", "samples", "total ms", "ms/sample"}};
        for (const auto &s : r.runtimes) {
            rt.push_back({s.stage, std::to_string(s.samples), fixed(s.total_ms, 2), fixed(s.ms_per_sample(), 5)});
        }
        out << format_table(rt);
    }
    return out.str();
}

}  // namespace macprint
