#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ial/detector.hpp"

namespace ial {

enum class Phase { One, Two };

/// How a detection is paired with a ground-truth event.
enum class MatchRule {
    Midpoint,  // detection midpoint inside the truth interval
    IoU,       // intersection-over-union >= 0.5
};

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    /// Window-level diagnostic only; never used by the event metrics.
    std::size_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

struct EventMatch {
    std::size_t detected = 0;
    std::size_t truth = 0;
    bool label_agrees = false;
};

struct MatchResult {
    ConfusionCounts counts;
    std::vector<EventMatch> matches;
};

/// Whether `d` may pair with `t` under `rule`.
bool events_correspond(const DetectedEvent& d, const GroundTruthEvent& t, MatchRule rule);

/// Greedy one-to-one matching in detection order; each truth event is
/// consumed by the first detection that corresponds to it. Phase one counts
/// every pair as TP; phase two requires matching labels, otherwise the pair
/// is one FP plus one FN. Throws UnsortedInput.
MatchResult match_events(std::span<const DetectedEvent> detected, std::span<const GroundTruthEvent> truth, Phase phase,
                         MatchRule rule = MatchRule::Midpoint);

struct ClassMetrics {
    ConfusionCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    Phase phase = Phase::One;
    ConfusionCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::array<ClassMetrics, kNumInterestClasses> per_class{};
};

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

/// Precision, recall and their harmonic mean; any zero denominator gives 0.
MetricsReport precision_recall_f1(const ConfusionCounts& c);

struct RunReport {
    MetricsReport phase_one;
    MetricsReport phase_two;
    /// Rows: true class. Columns: predicted class, then "missed".
    std::array<std::array<std::size_t, kNumInterestClasses + 1>, kNumInterestClasses> confusion{};
    /// Window-level spotting counts (includes TN).
    ConfusionCounts window_counts;
    std::size_t streams = 0;
    std::size_t truth_events = 0;
    std::size_t detections = 0;
};

/// Accumulates one stream's detections into a run report (micro-averaging).
void accumulate_stream(RunReport& report, std::span<const DetectedEvent> detected,
                       std::span<const GroundTruthEvent> truth, MatchRule rule = MatchRule::Midpoint);

/// Recomputes precision/recall/F1 from the accumulated counts.
void finalize(RunReport& report);

/// Runs detect on every test stream and micro-averages the counts.
RunReport evaluate_run(std::span<const LabeledStream> test, DetectionModels& models, const DetectorConfig& cfg,
                       MatchRule rule = MatchRule::Midpoint);

/// Precision/Recall/F1 table in percent, one row per named model.
std::string format_table(const std::string& title, const std::vector<std::pair<std::string, MetricsReport>>& rows);

nlohmann::ordered_json to_json(const MetricsReport& r);
nlohmann::ordered_json to_json(const RunReport& r);

}  // namespace ial
