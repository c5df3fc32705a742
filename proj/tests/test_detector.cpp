#include <doctest.h>

#include <cmath>

#include "ial/detector.hpp"
#include "test_util.hpp"

using namespace ial;
using namespace ial::nn;

namespace {

std::vector<WindowScore> scores_from(const std::vector<double>& probs, double step = 0.3) {
    std::vector<WindowScore> out;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        WindowScore s;
        s.start_frame = 15 * i;
        s.start_t = step * static_cast<double>(i);
        s.interest_prob = probs[i];
        out.push_back(s);
    }
    return out;
}

/// A network whose logits equal `bias` for every input.
Network constant_network(const ModelSpec& spec, const std::vector<double>& bias) {
    Network net(spec, 1);
    for (Param* p : net.params()) p->value.fill(0.0);
    Param* last = net.params().back();
    REQUIRE(last->value.size() == bias.size());
    last->value.values = bias;
    return net;
}

Stream synthetic(std::uint64_t seed, std::size_t events = 5) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.events_per_stream = events;
    return generate_synthetic_stream(cfg).first;
}

}  // namespace

TEST_CASE("segment_events examples") {
    DetectorConfig cfg;
    cfg.min_event_windows = 3;

    CHECK(segment_events(scores_from({0, 0, 0, 0}), cfg).empty());

    const auto s = scores_from({0.9, 0.9, 0.9});
    const auto one = segment_events(s, cfg);
    REQUIRE(one.size() == 1);
    CHECK(one[0].start == 0.0);
    CHECK(one[0].end == doctest::Approx(0.6 + 3.0));
    CHECK(one[0].first_window == 0);
    CHECK(one[0].last_window == 2);

    const auto pattern = scores_from({0.9, 0.9, 0.1, 0.9, 0.9});
    cfg.merge_gap_windows = 1;
    const auto merged = segment_events(pattern, cfg);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].first_window == 0);
    CHECK(merged[0].last_window == 4);
    cfg.merge_gap_windows = 0;
    CHECK(segment_events(pattern, cfg).empty());
}

TEST_CASE("segment_events threshold is inclusive") {
    DetectorConfig cfg;
    cfg.min_event_windows = 1;
    cfg.interest_threshold = 0.5;
    CHECK(segment_events(scores_from({0.5}), cfg).size() == 1);
    CHECK(segment_events(scores_from({0.4999}), cfg).empty());
}

TEST_CASE("segment_events rejects unsorted scores") {
    auto s = scores_from({0.9, 0.9, 0.9});
    std::swap(s[0].start_t, s[2].start_t);
    CHECK_ERROR_CODE(segment_events(s, DetectorConfig{}), ErrorCode::UnsortedInput);
}

TEST_CASE("segment_events output is disjoint, ordered and monotone in the threshold") {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> p(5 + rng.below(60));
        for (auto& v : p) v = rng.uniform();
        const auto s = scores_from(p);
        DetectorConfig cfg;
        cfg.min_event_windows = 1 + rng.below(4);
        cfg.merge_gap_windows = rng.below(4);
        cfg.interest_threshold = rng.uniform(0.2, 0.8);
        const auto iv = segment_events(s, cfg);
        for (std::size_t i = 0; i < iv.size(); ++i) {
            CHECK(iv[i].start < iv[i].end);
            CHECK(iv[i].last_window - iv[i].first_window + 1 >= cfg.min_event_windows);
            if (i > 0) CHECK(iv[i - 1].last_window < iv[i].first_window);
            // windows that clear the threshold are covered unless their run was dropped
        }
        // raising the threshold never creates positives: covered windows shrink
        DetectorConfig hi = cfg;
        hi.interest_threshold = std::min(1.0, cfg.interest_threshold + 0.1);
        hi.min_event_windows = 1;
        hi.merge_gap_windows = 0;
        DetectorConfig lo = hi;
        lo.interest_threshold = cfg.interest_threshold;
        auto covered = [&](const std::vector<CandidateInterval>& v) {
            std::vector<bool> c(p.size(), false);
            for (const auto& x : v)
                for (std::size_t w = x.first_window; w <= x.last_window; ++w) c[w] = true;
            return c;
        };
        const auto c_hi = covered(segment_events(s, hi));
        const auto c_lo = covered(segment_events(s, lo));
        for (std::size_t w = 0; w < p.size(); ++w) CHECK((!c_hi[w] || c_lo[w]));
    }
}

TEST_CASE("argmax and classify_from_probs") {
    CHECK(argmax_lowest(std::vector<double>{0.2, 0.4, 0.4}).first == 1);
    CHECK(argmax_lowest(std::vector<double>{0.5, 0.5}).first == 0);

    const std::vector<std::vector<double>> tie{{0.6, 0.4, 0, 0, 0}, {0.4, 0.6, 0, 0, 0}};
    const auto [label, conf] = classify_from_probs(tie, ClassificationMode::MeanProbability, 0);
    CHECK(label == ActionClass::SwipeLeft);
    CHECK(conf == doctest::Approx(0.5));

    const std::vector<std::vector<double>> same(4, {0.1, 0.1, 0.5, 0.2, 0.1});
    const auto mean = classify_from_probs(same, ClassificationMode::MeanProbability, 2);
    const auto centre = classify_from_probs(same, ClassificationMode::CenterWindow, 2);
    CHECK(mean.first == centre.first);
    CHECK(mean.second == doctest::Approx(centre.second));
    CHECK(mean.first == ActionClass::Wave);

    const std::vector<std::vector<double>> differ{{1, 0, 0, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 1, 0}};
    CHECK(classify_from_probs(differ, ClassificationMode::CenterWindow, 0).first == ActionClass::SwipeLeft);
    CHECK(classify_from_probs(differ, ClassificationMode::MeanProbability, 0).first == ActionClass::CircleCW);
}

TEST_CASE("classify_event with a constant model") {
    const Stream s = synthetic(3);
    for (FeatureKind kind : {FeatureKind::Vector, FeatureKind::Image}) {
        Network clf = constant_network(classifier_spec(kind), {0, 0, 60, 0, 0});
        CandidateInterval iv{10.0, 14.0, 0, 0};
        for (auto mode : {ClassificationMode::MeanProbability, ClassificationMode::CenterWindow}) {
            DetectorConfig cfg;
            cfg.classification_mode = mode;
            const auto [label, conf] = classify_event(s, iv, clf, kind, cfg);
            CHECK(label == ActionClass::Wave);
            CHECK(conf == doctest::Approx(1.0).epsilon(1e-12));
        }
        CandidateInterval outside{100.0, 130.0, 0, 0};
        CHECK_ERROR_CODE(classify_event(s, outside, clf, kind, DetectorConfig{}), ErrorCode::IntervalOutsideStream);
    }
}

TEST_CASE("detect") {
    const Stream s = synthetic(4);
    SUBCASE("all-negative spotter gives no events") {
        DetectionModels m{FeatureKind::Vector, constant_network(spotter_spec(FeatureKind::Vector), {10, -10}),
                          constant_network(classifier_spec(FeatureKind::Vector), {1, 0, 0, 0, 0})};
        std::vector<WindowScore> scores;
        CHECK(detect(s, m, DetectorConfig{}, scores).empty());
        CHECK(scores.size() == 391);
    }
    SUBCASE("all-positive spotter gives one event clamped to the stream") {
        DetectionModels m{FeatureKind::Vector, constant_network(spotter_spec(FeatureKind::Vector), {-10, 10}),
                          constant_network(classifier_spec(FeatureKind::Vector), {0, 0, 0, 0, 5})};
        const auto ev = detect(s, m, DetectorConfig{});
        REQUIRE(ev.size() == 1);
        CHECK(ev[0].start == s.samples.front().t);
        CHECK(ev[0].end == s.samples.back().t);
        CHECK(ev[0].label == ActionClass::CircleCCW);
    }
    SUBCASE("too-short stream") {
        Stream tiny;
        for (int i = 0; i < 100; ++i) tiny.samples.push_back({i / 50.0, 0, 0, 0, 0, 0, 0});
        DetectionModels m{FeatureKind::Vector, Network(spotter_spec(FeatureKind::Vector), 1),
                          Network(classifier_spec(FeatureKind::Vector), 1)};
        CHECK_ERROR_CODE(detect(tiny, m, DetectorConfig{}), ErrorCode::StreamTooShort);
    }
    SUBCASE("feature kind mismatch") {
        DetectionModels m{FeatureKind::Vector, Network(spotter_spec(FeatureKind::Image), 1),
                          Network(classifier_spec(FeatureKind::Vector), 1)};
        CHECK_ERROR_CODE(detect(s, m, DetectorConfig{}), ErrorCode::ModelFeatureMismatch);
    }
    SUBCASE("deterministic and ordered for random weights") {
        DetectionModels m{FeatureKind::Vector, Network(spotter_spec(FeatureKind::Vector), 9),
                          Network(classifier_spec(FeatureKind::Vector), 9)};
        DetectorConfig cfg;
        cfg.interest_threshold = 0.3;
        const auto a = detect(s, m, cfg);
        const auto b = detect(s, m, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].start == b[i].start);
            CHECK(a[i].label == b[i].label);
            CHECK(a[i].confidence == b[i].confidence);
            if (i > 0) CHECK(a[i - 1].end <= a[i].start + 3.0);
            if (i > 0) CHECK(a[i - 1].start < a[i].start);
        }
    }
}

TEST_CASE("detector config validation") {
    DetectorConfig cfg;
    cfg.interest_threshold = 1.5;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
    cfg = {};
    cfg.stride_frames = 0;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
}

TEST_CASE("training set construction") {
    const std::vector<GroundTruthEvent> ev{{ActionClass::Wave, 10.0, 12.0}, {ActionClass::SwipeLeft, 13.0, 15.0}};
    CHECK(max_event_overlap(9.0, 12.0, ev) == doctest::Approx(2.0));
    CHECK(max_event_overlap(11.0, 14.0, ev) == doctest::Approx(1.0));
    CHECK(max_event_overlap(0.0, 3.0, ev) == 0.0);

    SyntheticConfig sc;
    sc.seed = 5;
    auto [stream, events] = generate_synthetic_stream(sc);
    std::vector<LabeledStream> ls{{stream, events}};
    WindowLabelConfig wl;
    const auto spot = build_spotter_data(ls, FeatureKind::Vector, wl);
    std::size_t pos = 0;
    for (int y : spot.labels) pos += y == 1;
    CHECK(pos > 0);
    CHECK(pos * 2 == spot.size());  // balanced
    CHECK(spot.sample_shape == Shape{16});

    const auto clf = build_classifier_data(ls, FeatureKind::Image, wl);
    CHECK(clf.sample_shape == Shape{50, 8, 1});
    std::vector<int> seen(5, 0);
    for (int y : clf.labels) ++seen[static_cast<std::size_t>(y)];
    for (int c : seen) CHECK(c > 0);
}
