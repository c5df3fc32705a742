#include "ial/detector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "ial/error.hpp"
#include "ial/parallel.hpp"

namespace ial {

namespace {

constexpr double kTimeTolerance = 1e-9;

double window_duration_of(const Stream& stream) {
    return static_cast<double>(kWindowFrames) / stream.sample_rate_hz;
}

/// Scores every window of `windows` with `net`, batching the forward passes.
std::vector<std::vector<double>> predict_windows(nn::Network& net, std::span<const SignalWindow> windows,
                                                 FeatureKind kind) {
    constexpr std::size_t kBatch = 64;
    std::vector<std::vector<double>> out;
    out.reserve(windows.size());
    for (std::size_t begin = 0; begin < windows.size(); begin += kBatch) {
        const auto chunk = windows.subspan(begin, std::min(kBatch, windows.size() - begin));
        const nn::Tensor p = net.predict_proba(feature_batch(chunk, kind));
        const std::size_t k = p.dim(1);
        for (std::size_t r = 0; r < chunk.size(); ++r) {
            out.emplace_back(p.values.begin() + static_cast<std::ptrdiff_t>(r * k),
                             p.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
        }
    }
    return out;
}

/// Grid windows whose whole span lies inside the interval, plus the grid
/// window whose centre is nearest the interval midpoint.
struct IntervalWindows {
    std::vector<std::size_t> inside;
    std::size_t center = 0;
};

IntervalWindows interval_windows(const Stream& stream, const CandidateInterval& interval, std::size_t stride) {
    const std::size_t n = window_count(stream.size(), stride);
    const double span = window_duration_of(stream);
    const double mid = 0.5 * (interval.start + interval.end);
    IntervalWindows iw;
    double best = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        const double t0 = stream.samples[i * stride].t;
        if (t0 >= interval.start - kTimeTolerance && t0 + span <= interval.end + kTimeTolerance) {
            iw.inside.push_back(i);
        }
        const double d = std::abs(t0 + 0.5 * span - mid);
        if (d < best) {
            best = d;
            iw.center = i;
        }
    }
    return iw;
}

void check_interval(const Stream& stream, const CandidateInterval& interval) {
    if (stream.size() < kWindowFrames) {
        throw Error(ErrorCode::StreamTooShort, std::to_string(stream.size()) + " samples");
    }
    const double t_begin = stream.samples.front().t;
    const double t_end = stream.samples.back().t + 1.0 / stream.sample_rate_hz;
    if (!(interval.start < interval.end) || interval.start < t_begin - kTimeTolerance ||
        interval.end > t_end + kTimeTolerance) {
        throw Error(ErrorCode::IntervalOutsideStream,
                    "[" + std::to_string(interval.start) + ", " + std::to_string(interval.end) + "]");
    }
}

std::pair<ActionClass, double> classify_indices(const IntervalWindows& iw, ClassificationMode mode,
                                                const std::function<const std::vector<double>&(std::size_t)>& probs) {
    std::vector<std::vector<double>> rows;
    std::size_t center_row = 0;
    if (mode == ClassificationMode::CenterWindow || iw.inside.empty()) {
        rows.push_back(probs(iw.center));
        return classify_from_probs(rows, ClassificationMode::CenterWindow, 0);
    }
    for (std::size_t i : iw.inside) {
        if (i == iw.center) center_row = rows.size();
        rows.push_back(probs(i));
    }
    return classify_from_probs(rows, mode, center_row);
}

}  // namespace

void DetectorConfig::validate() const {
    if (!(interest_threshold > 0.0 && interest_threshold < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "interest_threshold must be in (0,1)");
    }
    if (min_event_windows < 1) throw Error(ErrorCode::InvalidConfig, "min_event_windows must be >= 1");
    if (stride_frames < 1) throw Error(ErrorCode::InvalidConfig, "stride_frames must be >= 1");
}

void require_feature_match(const nn::Network& net, FeatureKind kind) {
    const nn::Shape want = kind == FeatureKind::Image ? nn::Shape{kImageRows, kChannels, 1} : nn::Shape{kVectorDim};
    if (net.spec().input_shape != want) {
        throw Error(ErrorCode::ModelFeatureMismatch,
                    std::string(kind == FeatureKind::Image ? "image" : "vector") + " features need input " +
                        nn::shape_string(want) + ", model takes " + nn::shape_string(net.spec().input_shape));
    }
}

nn::Tensor feature_batch(std::span<const SignalWindow> windows, FeatureKind kind) {
    nn::Shape shape{windows.size()};
    if (kind == FeatureKind::Image) {
        shape.insert(shape.end(), {kImageRows, kChannels, 1});
    } else {
        shape.push_back(kVectorDim);
    }
    nn::Tensor batch(shape);
    const std::size_t per = batch.size() / std::max<std::size_t>(1, windows.size());
    parallel_for(windows.size(), [&](std::size_t i) {
        const auto v = feature_values(windows[i], kind);
        std::copy(v.begin(), v.end(), batch.values.begin() + static_cast<std::ptrdiff_t>(i * per));
    });
    return batch;
}

std::vector<WindowScore> score_windows(const Stream& stream, nn::Network& spotter, FeatureKind kind,
                                       std::size_t stride_frames) {
    require_feature_match(spotter, kind);
    if (spotter.num_classes() != 2) {
        throw Error(ErrorCode::ModelFeatureMismatch, "spotter must have 2 classes");
    }
    const auto windows = slide_windows(stream, stride_frames);
    const auto probs = predict_windows(spotter, windows, kind);
    std::vector<WindowScore> scores(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        scores[i].start_frame = windows[i].start_frame;
        scores[i].start_t = windows[i].start_t;
        scores[i].interest_prob = probs[i][kInterestIndex];
    }
    return scores;
}

std::vector<CandidateInterval> segment_events(std::span<const WindowScore> scores, const DetectorConfig& cfg,
                                              double window_duration) {
    std::vector<CandidateInterval> out;
    std::optional<std::size_t> first, last;
    auto close = [&] {
        if (first && *last - *first + 1 >= cfg.min_event_windows) {
            out.push_back({scores[*first].start_t, scores[*last].start_t + window_duration, *first, *last});
        }
        first.reset();
        last.reset();
    };
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i > 0 && scores[i].start_t < scores[i - 1].start_t) {
            throw Error(ErrorCode::UnsortedInput, "window scores must be time-ordered");
        }
        if (scores[i].interest_prob < cfg.interest_threshold) continue;
        if (first && i - *last - 1 > cfg.merge_gap_windows) close();
        if (!first) first = i;
        last = i;
    }
    close();
    return out;
}

std::pair<std::size_t, double> argmax_lowest(std::span<const double> probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return {best, probs.empty() ? 0.0 : probs[best]};
}

std::pair<ActionClass, double> classify_from_probs(std::span<const std::vector<double>> window_probs,
                                                   ClassificationMode mode, std::size_t center_row) {
    if (window_probs.empty()) throw Error(ErrorCode::OutOfRange, "no windows to classify");
    std::vector<double> agg;
    if (mode == ClassificationMode::CenterWindow) {
        agg = window_probs[std::min(center_row, window_probs.size() - 1)];
    } else {
        agg.assign(window_probs.front().size(), 0.0);
        for (const auto& row : window_probs) {
            for (std::size_t c = 0; c < agg.size(); ++c) agg[c] += row[c];
        }
        for (auto& v : agg) v /= static_cast<double>(window_probs.size());
    }
    const auto [idx, conf] = argmax_lowest(agg);
    return {static_cast<ActionClass>(idx), conf};
}

std::pair<ActionClass, double> classify_event(const Stream& stream, const CandidateInterval& interval,
                                              nn::Network& classifier, FeatureKind kind, const DetectorConfig& cfg) {
    require_feature_match(classifier, kind);
    if (classifier.num_classes() != static_cast<std::size_t>(kNumInterestClasses)) {
        throw Error(ErrorCode::ModelFeatureMismatch, "classifier must have 5 classes");
    }
    check_interval(stream, interval);
    const auto iw = interval_windows(stream, interval, cfg.stride_frames);

    std::vector<std::size_t> needed = iw.inside;
    needed.push_back(iw.center);
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    std::vector<SignalWindow> windows;
    windows.reserve(needed.size());
    for (std::size_t i : needed) windows.push_back(make_window(stream, i * cfg.stride_frames));
    const auto probs = predict_windows(classifier, windows, kind);

    return classify_indices(iw, cfg.classification_mode, [&](std::size_t i) -> const std::vector<double>& {
        const auto pos = std::lower_bound(needed.begin(), needed.end(), i) - needed.begin();
        return probs[static_cast<std::size_t>(pos)];
    });
}

std::vector<DetectedEvent> detect(const Stream& stream, DetectionModels& models, const DetectorConfig& cfg,
                                  std::vector<WindowScore>& scores_out) {
    cfg.validate();
    require_feature_match(models.spotter, models.feature_kind);
    require_feature_match(models.classifier, models.feature_kind);
    scores_out = score_windows(stream, models.spotter, models.feature_kind, cfg.stride_frames);
    const double span = window_duration_of(stream);
    const auto intervals = segment_events(scores_out, cfg, span);

    // Phase-two probabilities are computed once per window and cached on the score.
    auto window_probs = [&](std::size_t i) -> const std::vector<double>& {
        auto& s = scores_out[i];
        if (s.class_probs.empty()) {
            const SignalWindow w = make_window(stream, s.start_frame);
            s.class_probs = predict_windows(models.classifier, std::span(&w, 1), models.feature_kind).front();
        }
        return s.class_probs;
    };

    const double t_begin = stream.samples.front().t;
    const double t_end = stream.samples.back().t;
    std::vector<DetectedEvent> events;
    events.reserve(intervals.size());
    for (const auto& interval : intervals) {
        const auto iw = interval_windows(stream, interval, cfg.stride_frames);
        // Batch the uncached windows of this interval.
        std::vector<std::size_t> todo;
        for (std::size_t i : iw.inside) {
            if (scores_out[i].class_probs.empty()) todo.push_back(i);
        }
        if (!todo.empty()) {
            std::vector<SignalWindow> ws;
            ws.reserve(todo.size());
            for (std::size_t i : todo) ws.push_back(make_window(stream, scores_out[i].start_frame));
            auto probs = predict_windows(models.classifier, ws, models.feature_kind);
            for (std::size_t j = 0; j < todo.size(); ++j) scores_out[todo[j]].class_probs = std::move(probs[j]);
        }
        const auto [label, conf] = classify_indices(iw, cfg.classification_mode, window_probs);
        events.push_back({label, std::max(interval.start, t_begin), std::min(interval.end, t_end), conf});
    }
    return events;
}

std::vector<DetectedEvent> detect(const Stream& stream, DetectionModels& models, const DetectorConfig& cfg) {
    std::vector<WindowScore> scores;
    return detect(stream, models, cfg, scores);
}

// ---------------------------------------------------------------- training sets

double max_event_overlap(double start, double end, std::span<const GroundTruthEvent> events) {
    double best = 0.0;
    for (const auto& ev : events) {
        best = std::max(best, std::min(end, ev.end) - std::max(start, ev.start));
    }
    return best;
}

nn::LabeledData build_spotter_data(std::span<const LabeledStream> streams, FeatureKind kind,
                                   const WindowLabelConfig& cfg) {
    std::vector<std::pair<const LabeledStream*, std::size_t>> positives, negatives;
    for (const auto& ls : streams) {
        if (ls.stream.size() < kWindowFrames) continue;
        const double span = window_duration_of(ls.stream);
        const std::size_t n = window_count(ls.stream.size(), cfg.stride_frames);
        for (std::size_t i = 0; i < n; ++i) {
            const double t0 = ls.stream.samples[i * cfg.stride_frames].t;
            const bool pos = max_event_overlap(t0, t0 + span, ls.events) >= cfg.positive_overlap * span;
            (pos ? positives : negatives).emplace_back(&ls, i * cfg.stride_frames);
        }
    }
    if (cfg.balance && !positives.empty() && !negatives.empty()) {
        Rng rng(mix_seed(cfg.seed, 0xba1));
        auto& major = positives.size() > negatives.size() ? positives : negatives;
        const std::size_t keep = std::min(positives.size(), negatives.size());
        rng.shuffle(major.begin(), major.end());
        major.resize(keep);
        std::sort(major.begin(), major.end());
    }

    nn::LabeledData data;
    data.sample_shape = kind == FeatureKind::Image ? nn::Shape{kImageRows, kChannels, 1} : nn::Shape{kVectorDim};
    auto append = [&](const auto& list, int label) {
        for (const auto& [ls, frame] : list) data.add(feature_values(make_window(ls->stream, frame), kind), label);
    };
    append(negatives, 0);
    append(positives, kInterestIndex);
    return data;
}

nn::LabeledData build_classifier_data(std::span<const LabeledStream> streams, FeatureKind kind,
                                      const WindowLabelConfig& cfg) {
    nn::LabeledData data;
    data.sample_shape = kind == FeatureKind::Image ? nn::Shape{kImageRows, kChannels, 1} : nn::Shape{kVectorDim};
    for (const auto& ls : streams) {
        if (ls.stream.size() < kWindowFrames) continue;
        const double span = window_duration_of(ls.stream);
        const std::size_t n = window_count(ls.stream.size(), cfg.stride_frames);
        for (std::size_t i = 0; i < n; ++i) {
            const double center = ls.stream.samples[i * cfg.stride_frames].t + 0.5 * span;
            for (const auto& ev : ls.events) {
                if (center >= ev.start && center <= ev.end) {
                    data.add(feature_values(make_window(ls.stream, i * cfg.stride_frames), kind),
                             static_cast<int>(ev.label));
                    break;
                }
            }
        }
    }
    return data;
}

nn::ModelSpec spotter_spec(FeatureKind kind) {
    return kind == FeatureKind::Image ? nn::ModelSpec::cnn(2) : nn::ModelSpec::fc(2);
}

nn::ModelSpec classifier_spec(FeatureKind kind) {
    const auto k = static_cast<std::size_t>(kNumInterestClasses);
    return kind == FeatureKind::Image ? nn::ModelSpec::cnn(k) : nn::ModelSpec::fc(k);
}

TrainedModels train_detection_models(std::span<const LabeledStream> streams, FeatureKind kind,
                                     const nn::TrainConfig& train_cfg, const WindowLabelConfig& label_cfg,
                                     const nn::EpochCallback& on_epoch) {
    const auto spot_data = build_spotter_data(streams, kind, label_cfg);
    const auto cls_data = build_classifier_data(streams, kind, label_cfg);
    if (spot_data.size() == 0 || cls_data.size() == 0) {
        throw Error(ErrorCode::EmptyDataset, "no labelled windows in the training streams");
    }

    nn::TrainConfig spot_cfg = train_cfg;
    spot_cfg.seed = mix_seed(train_cfg.seed, 1);
    nn::TrainConfig cls_cfg = train_cfg;
    cls_cfg.seed = mix_seed(train_cfg.seed, 2);

    auto spot = nn::train(spotter_spec(kind), spot_data, spot_cfg, on_epoch);
    auto cls = nn::train(classifier_spec(kind), cls_data, cls_cfg, on_epoch);
    return {DetectionModels{kind, std::move(spot.network), std::move(cls.network)}, std::move(spot.epoch_loss),
            std::move(cls.epoch_loss)};
}

}  // namespace ial
