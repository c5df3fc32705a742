#include "ial/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "ial/error.hpp"

namespace ial {

namespace {

template <typename T>
void require_sorted(std::span<const T> events, const char* what) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].start < events[i - 1].start) {
            throw Error(ErrorCode::UnsortedInput, std::string(what) + " not sorted by start");
        }
    }
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void fill_metrics(ClassMetrics& m) {
    const auto r = precision_recall_f1(m.counts);
    m.precision = r.precision;
    m.recall = r.recall;
    m.f1 = r.f1;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

bool events_correspond(const DetectedEvent& d, const GroundTruthEvent& t, MatchRule rule) {
    if (rule == MatchRule::Midpoint) {
        const double mid = 0.5 * (d.start + d.end);
        return mid >= t.start && mid <= t.end;
    }
    const double inter = std::min(d.end, t.end) - std::max(d.start, t.start);
    if (inter <= 0.0) return false;
    const double uni = std::max(d.end, t.end) - std::min(d.start, t.start);
    return inter / uni >= 0.5;
}

MatchResult match_events(std::span<const DetectedEvent> detected, std::span<const GroundTruthEvent> truth, Phase phase,
                         MatchRule rule) {
    require_sorted(detected, "detected events");
    require_sorted(truth, "ground-truth events");

    MatchResult r;
    std::vector<bool> consumed(truth.size(), false);
    for (std::size_t d = 0; d < detected.size(); ++d) {
        std::optional<std::size_t> hit;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (!consumed[t] && events_correspond(detected[d], truth[t], rule)) {
                hit = t;
                break;
            }
        }
        if (!hit) {
            ++r.counts.fp;
            continue;
        }
        consumed[*hit] = true;
        const bool agrees = detected[d].label == truth[*hit].label;
        r.matches.push_back({d, *hit, agrees});
        if (phase == Phase::One || agrees) {
            ++r.counts.tp;
        } else {
            ++r.counts.fp;
            ++r.counts.fn;
        }
    }
    r.counts.fn += static_cast<std::size_t>(std::count(consumed.begin(), consumed.end(), false));
    return r;
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport precision_recall_f1(const ConfusionCounts& c) {
    MetricsReport m;
    m.counts = c;
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

void accumulate_stream(RunReport& report, std::span<const DetectedEvent> detected,
                       std::span<const GroundTruthEvent> truth, MatchRule rule) {
    const auto one = match_events(detected, truth, Phase::One, rule);
    const auto two = match_events(detected, truth, Phase::Two, rule);
    report.phase_one.counts += one.counts;
    report.phase_two.counts += two.counts;
    report.streams += 1;
    report.truth_events += truth.size();
    report.detections += detected.size();

    std::vector<bool> truth_hit(truth.size(), false), det_hit(detected.size(), false);
    for (const auto& m : one.matches) {
        truth_hit[m.truth] = true;
        det_hit[m.detected] = true;
        const auto tc = static_cast<std::size_t>(truth[m.truth].label);
        const auto dc = static_cast<std::size_t>(detected[m.detected].label);
        report.confusion[tc][dc] += 1;
        report.phase_one.per_class[tc].counts.tp += 1;
        if (m.label_agrees) {
            report.phase_two.per_class[tc].counts.tp += 1;
        } else {
            report.phase_two.per_class[dc].counts.fp += 1;
            report.phase_two.per_class[tc].counts.fn += 1;
        }
    }
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (truth_hit[t]) continue;
        const auto tc = static_cast<std::size_t>(truth[t].label);
        report.confusion[tc][kNumInterestClasses] += 1;
        report.phase_one.per_class[tc].counts.fn += 1;
        report.phase_two.per_class[tc].counts.fn += 1;
    }
    for (std::size_t d = 0; d < detected.size(); ++d) {
        if (det_hit[d]) continue;
        const auto dc = static_cast<std::size_t>(detected[d].label);
        report.phase_one.per_class[dc].counts.fp += 1;
        report.phase_two.per_class[dc].counts.fp += 1;
    }
}

void finalize(RunReport& report) {
    for (auto* m : {&report.phase_one, &report.phase_two}) {
        const auto per_class = m->per_class;
        const Phase phase = m == &report.phase_one ? Phase::One : Phase::Two;
        *m = precision_recall_f1(m->counts);
        m->phase = phase;
        m->per_class = per_class;
        for (auto& c : m->per_class) fill_metrics(c);
    }
}

RunReport evaluate_run(std::span<const LabeledStream> test, DetectionModels& models, const DetectorConfig& cfg,
                       MatchRule rule) {
    RunReport report;
    for (const auto& ls : test) {
        std::vector<WindowScore> scores;
        const auto events = detect(ls.stream, models, cfg, scores);
        accumulate_stream(report, events, ls.events, rule);

        const double span = static_cast<double>(kWindowFrames) / ls.stream.sample_rate_hz;
        for (const auto& s : scores) {
            const bool actual = max_event_overlap(s.start_t, s.start_t + span, ls.events) >= 0.5 * span;
            const bool predicted = s.interest_prob >= cfg.interest_threshold;
            auto& w = report.window_counts;
            if (actual && predicted) ++w.tp;
            else if (actual) ++w.fn;
            else if (predicted) ++w.fp;
            else ++w.tn;
        }
    }
    finalize(report);
    return report;
}

std::string format_table(const std::string& title, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::size_t width = 5;
    for (const auto& [name, _] : rows) width = std::max(width, name.size());
    std::string out = title + "\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), "Model", "Precision", "Recall",
                  "F1");
    out += buf;
    for (const auto& [name, m] : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %8.1f%%  %8.1f%%  %8.1f%%\n", static_cast<int>(width), name.c_str(),
                      100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1);
        out += buf;
    }
    return out;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    auto counts = [](const ConfusionCounts& c) {
        return nlohmann::ordered_json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    };
    nlohmann::ordered_json j{{"phase", r.phase == Phase::One ? "one" : "two"},
                             {"counts", counts(r.counts)},
                             {"precision", r.precision},
                             {"recall", r.recall},
                             {"f1", r.f1}};
    auto& pc = j["per_class"] = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        pc[std::string(class_name(static_cast<ActionClass>(c)))] = {
            {"counts", counts(m.counts)}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    }
    return j;
}

nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["streams"] = r.streams;
    j["truth_events"] = r.truth_events;
    j["detections"] = r.detections;
    j["phase_one"] = to_json(r.phase_one);
    j["phase_two"] = to_json(r.phase_two);
    auto& conf = j["confusion"] = nlohmann::ordered_json::object();
    for (std::size_t t = 0; t < r.confusion.size(); ++t) {
        nlohmann::ordered_json row;
        for (std::size_t p = 0; p < kNumInterestClasses; ++p) {
            row[std::string(class_name(static_cast<ActionClass>(p)))] = r.confusion[t][p];
        }
        row["missed"] = r.confusion[t][kNumInterestClasses];
        conf[std::string(class_name(static_cast<ActionClass>(t)))] = row;
    }
    j["window_counts"] = {{"tp", r.window_counts.tp},
                          {"fp", r.window_counts.fp},
                          {"fn", r.window_counts.fn},
                          {"tn", r.window_counts.tn}};
    return j;
}

}  // namespace ial
