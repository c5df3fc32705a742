#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ial/features.hpp"
#include "ial/inertial_io.hpp"
#include "ial/nn/network.hpp"
#include "ial/nn/train.hpp"

namespace ial {

enum class ClassificationMode { CenterWindow, MeanProbability };

struct DetectorConfig {
    double interest_threshold = 0.5;
    std::size_t min_event_windows = 3;
    std::size_t merge_gap_windows = 2;
    std::size_t stride_frames = kDefaultStrideFrames;
    ClassificationMode classification_mode = ClassificationMode::MeanProbability;

    /// Throws InvalidConfig.
    void validate() const;
};

/// Phase-one output for one sliding window.
struct WindowScore {
    std::size_t start_frame = 0;
    double start_t = 0.0;
    double interest_prob = 0.0;
    /// Filled only when phase two has scored this window.
    std::vector<double> class_probs;
};

struct CandidateInterval {
    double start = 0.0;
    double end = 0.0;
    std::size_t first_window = 0;
    std::size_t last_window = 0;
};

struct DetectedEvent {
    ActionClass label = ActionClass::SwipeLeft;
    double start = 0.0;
    double end = 0.0;
    double confidence = 0.0;
};

/// Phase-one binary spotter and phase-two 5-way classifier; both consume
/// the same feature kind (image -> CNN, vector -> dense network).
struct DetectionModels {
    FeatureKind feature_kind = FeatureKind::Image;
    nn::Network spotter;
    nn::Network classifier;
};

/// Phase-one class index of "interest" (index 0 is non-interest).
inline constexpr int kInterestIndex = 1;

/// Throws ModelFeatureMismatch unless the network consumes `kind`.
void require_feature_match(const nn::Network& net, FeatureKind kind);

/// Stacks model inputs for the given windows into one batch.
nn::Tensor feature_batch(std::span<const SignalWindow> windows, FeatureKind kind);

/// One score per sliding window; throws StreamTooShort / ModelFeatureMismatch.
std::vector<WindowScore> score_windows(const Stream& stream, nn::Network& spotter, FeatureKind kind,
                                       std::size_t stride_frames = kDefaultStrideFrames);

/// Thresholds, merges runs separated by at most merge_gap_windows negatives,
/// drops runs spanning fewer than min_event_windows windows, and maps each
/// run to [first start, last start + window_duration].
std::vector<CandidateInterval> segment_events(std::span<const WindowScore> scores, const DetectorConfig& cfg,
                                              double window_duration = 3.0);

/// Argmax with ties to the lowest index; returns (index, probability).
std::pair<std::size_t, double> argmax_lowest(std::span<const double> probs);

/// Aggregates per-window class probabilities: mean over all rows, or the
/// row at `center_row`. Returns (class, confidence).
std::pair<ActionClass, double> classify_from_probs(std::span<const std::vector<double>> window_probs,
                                                   ClassificationMode mode, std::size_t center_row);

/// Classifies the gesture in [start, end] with the phase-two model.
/// Throws IntervalOutsideStream.
std::pair<ActionClass, double> classify_event(const Stream& stream, const CandidateInterval& interval,
                                              nn::Network& classifier, FeatureKind kind, const DetectorConfig& cfg);

/// Full two-phase pass. Events are sorted, disjoint and clamped to the stream span.
std::vector<DetectedEvent> detect(const Stream& stream, DetectionModels& models, const DetectorConfig& cfg);

/// Same as detect, also returning the window scores it computed.
std::vector<DetectedEvent> detect(const Stream& stream, DetectionModels& models, const DetectorConfig& cfg,
                                  std::vector<WindowScore>& scores_out);

// ---------------------------------------------------------------- training sets

struct WindowLabelConfig {
    std::size_t stride_frames = kDefaultStrideFrames;
    /// Minimum fraction of the window covered by one event for a positive.
    double positive_overlap = 0.5;
    /// Randomly undersample the majority class of the spotting set.
    bool balance = true;
    std::uint64_t seed = 1;
};

/// Longest overlap (seconds) between [start, end] and any single event.
double max_event_overlap(double start, double end, std::span<const GroundTruthEvent> events);

/// Phase-one set: label 1 iff >= positive_overlap of the window lies in one event.
nn::LabeledData build_spotter_data(std::span<const LabeledStream> streams, FeatureKind kind,
                                   const WindowLabelConfig& cfg);

/// Phase-two set: windows centred inside an event, labelled by its class.
nn::LabeledData build_classifier_data(std::span<const LabeledStream> streams, FeatureKind kind,
                                      const WindowLabelConfig& cfg);

nn::ModelSpec spotter_spec(FeatureKind kind);
nn::ModelSpec classifier_spec(FeatureKind kind);

struct TrainedModels {
    DetectionModels models;
    std::vector<double> spotter_loss;
    std::vector<double> classifier_loss;
};

/// Trains both phases on the given streams with independent seeds.
TrainedModels train_detection_models(std::span<const LabeledStream> streams, FeatureKind kind,
                                     const nn::TrainConfig& train_cfg, const WindowLabelConfig& label_cfg,
                                     const nn::EpochCallback& on_epoch = {});

}  // namespace ial
