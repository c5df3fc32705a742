#include <doctest.h>

#include <cmath>

#include "ial/evaluation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ial;

namespace {

DetectedEvent det(double s, double e, ActionClass c = ActionClass::SwipeLeft) { return {c, s, e, 1.0}; }
GroundTruthEvent gt(double s, double e, ActionClass c = ActionClass::SwipeLeft) { return {c, s, e}; }

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.fn = fn;
    return c;
}

/// Random ordered, disjoint events in [0, 60).
template <typename Make>
auto random_events(Rng& rng, std::size_t n, Make make) {
    std::vector<double> cuts;
    for (std::size_t i = 0; i < 2 * n; ++i) cuts.push_back(rng.uniform(0, 60));
    std::sort(cuts.begin(), cuts.end());
    std::vector<decltype(make(0.0, 0.0, ActionClass::SwipeLeft))> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (cuts[2 * i] == cuts[2 * i + 1]) continue;
        out.push_back(make(cuts[2 * i], cuts[2 * i + 1], static_cast<ActionClass>(rng.below(3))));
    }
    return out;
}

}  // namespace

TEST_CASE("match_events examples") {
    const std::vector<DetectedEvent> d{det(10, 13)};
    const std::vector<GroundTruthEvent> t{gt(9, 14)};
    for (Phase ph : {Phase::One, Phase::Two}) {
        const auto r = match_events(d, t, ph);
        CHECK(r.counts == counts(1, 0, 0));
        REQUIRE(r.matches.size() == 1);
    }

    const std::vector<GroundTruthEvent> three{gt(1, 2), gt(5, 6), gt(9, 10)};
    CHECK(match_events({}, three, Phase::One).counts == counts(0, 0, 3));

    const std::vector<DetectedEvent> wrong{det(10, 13, ActionClass::Wave)};
    CHECK(match_events(wrong, t, Phase::Two).counts == counts(0, 1, 1));
    CHECK(match_events(wrong, t, Phase::One).counts == counts(1, 0, 0));

    // two detections on one truth event: the second is FP
    const std::vector<DetectedEvent> dup{det(9, 10), det(12, 13)};
    CHECK(match_events(dup, t, Phase::One).counts == counts(1, 1, 0));

    // a midpoint on the boundary counts as inside
    const std::vector<DetectedEvent> edge{det(13, 15)};
    CHECK(match_events(edge, t, Phase::One).counts == counts(1, 0, 0));
}

TEST_CASE("match_events under the IoU rule") {
    const std::vector<GroundTruthEvent> t{gt(0, 4)};
    CHECK(match_events(std::vector{det(0, 2)}, t, Phase::One, MatchRule::IoU).counts == counts(1, 0, 0));
    CHECK(match_events(std::vector{det(0, 1.9)}, t, Phase::One, MatchRule::IoU).counts == counts(0, 1, 1));
    CHECK(match_events(std::vector{det(3, 8)}, t, Phase::One, MatchRule::IoU).counts == counts(0, 1, 1));
}

TEST_CASE("match_events rejects unsorted input") {
    const std::vector<DetectedEvent> d{det(5, 6), det(1, 2)};
    CHECK_ERROR_CODE(match_events(d, std::vector<GroundTruthEvent>{}, Phase::One), ErrorCode::UnsortedInput);
    const std::vector<GroundTruthEvent> t{gt(5, 6), gt(1, 2)};
    CHECK_ERROR_CODE(match_events(std::vector<DetectedEvent>{}, t, Phase::One), ErrorCode::UnsortedInput);
}

TEST_CASE("match_events agrees with the brute-force oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto d = random_events(rng, rng.below(6), [](double s, double e, ActionClass c) { return det(s, e, c); });
        const auto t = random_events(rng, rng.below(6), [](double s, double e, ActionClass c) { return gt(s, e, c); });
        for (Phase ph : {Phase::One, Phase::Two}) {
            for (MatchRule rule : {MatchRule::Midpoint, MatchRule::IoU}) {
                int consistent = 0;
                const auto want = oracle::brute_force_match(d, t, ph, rule, &consistent);
                CHECK(consistent == 1);
                CHECK(match_events(d, t, ph, rule).counts == want);
            }
        }
        const auto one = match_events(d, t, Phase::One).counts;
        const auto two = match_events(d, t, Phase::Two).counts;
        CHECK(two.tp <= one.tp);
        CHECK(one.tp + one.fn == t.size());
        CHECK(one.tp + one.fp == d.size());
    }
}

TEST_CASE("precision_recall_f1") {
    auto r = precision_recall_f1(counts(3, 1, 2));
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.recall == doctest::Approx(0.6));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));

    for (auto c : {counts(0, 5, 0), counts(0, 0, 5), counts(0, 3, 4), counts(0, 0, 0)}) {
        r = precision_recall_f1(c);
        CHECK(r.precision == 0.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }

    Rng rng(29);
    for (int i = 0; i < 1000; ++i) {
        r = precision_recall_f1(counts(1 + rng.below(50), rng.below(50), rng.below(50)));
        CHECK(r.f1 >= std::min(r.precision, r.recall) - 1e-15);
        CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-15);
        CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
    }
}

TEST_CASE("run report on a hand-built scenario") {
    // stream A: truth Wave [2,4], SwipeLeft [10,12]; detections: Wave ok, SwipeRight on SwipeLeft
    // stream B: truth CircleCW [5,7], CircleCCW [20,22]; detection: CircleCW ok, second missed
    RunReport rep;
    const std::vector<GroundTruthEvent> ta{gt(2, 4, ActionClass::Wave), gt(10, 12, ActionClass::SwipeLeft)};
    const std::vector<DetectedEvent> da{det(2, 4, ActionClass::Wave), det(10, 12, ActionClass::SwipeRight)};
    const std::vector<GroundTruthEvent> tb{gt(5, 7, ActionClass::CircleCW), gt(20, 22, ActionClass::CircleCCW)};
    const std::vector<DetectedEvent> db{det(5, 7, ActionClass::CircleCW)};
    accumulate_stream(rep, da, ta);
    accumulate_stream(rep, db, tb);
    finalize(rep);
    CHECK(rep.phase_one.precision == doctest::Approx(3.0 / 3.0));
    CHECK(rep.phase_one.recall == doctest::Approx(3.0 / 4.0));
    CHECK(rep.phase_two.precision == doctest::Approx(2.0 / 3.0));
    CHECK(rep.phase_two.recall == doctest::Approx(2.0 / 4.0));
    CHECK(rep.streams == 2);
    CHECK(rep.truth_events == 4);
    CHECK(rep.detections == 3);

    const auto sl = static_cast<std::size_t>(ActionClass::SwipeLeft);
    const auto sr = static_cast<std::size_t>(ActionClass::SwipeRight);
    const auto ccw = static_cast<std::size_t>(ActionClass::CircleCCW);
    CHECK(rep.confusion[sl][sr] == 1);
    CHECK(rep.confusion[ccw][kNumInterestClasses] == 1);

    // micro-averaging: totals are the sum of per-stream counts
    const auto a = match_events(da, ta, Phase::Two).counts;
    const auto b = match_events(db, tb, Phase::Two).counts;
    ConfusionCounts sum = a;
    sum += b;
    CHECK(rep.phase_two.counts.tp == sum.tp);
    CHECK(rep.phase_two.counts.fp == sum.fp);
    CHECK(rep.phase_two.counts.fn == sum.fn);

    const auto text = format_table("Performance on Phase Two", {{"CNN", rep.phase_two}});
    CHECK(text.find("66.7") != std::string::npos);
    CHECK(text.find("50.0") != std::string::npos);
    const auto j = to_json(rep);
    CHECK(j.contains("phase_one"));
}

TEST_CASE("perfect and silent detectors") {
    RunReport perfect;
    const std::vector<GroundTruthEvent> t{gt(1, 3, ActionClass::Wave), gt(6, 9, ActionClass::CircleCW)};
    const std::vector<DetectedEvent> d{det(1, 3, ActionClass::Wave), det(6, 9, ActionClass::CircleCW)};
    accumulate_stream(perfect, d, t);
    finalize(perfect);
    CHECK(perfect.phase_one.f1 == 1.0);
    CHECK(perfect.phase_two.f1 == 1.0);

    SyntheticConfig sc;
    sc.seed = 8;
    auto [s, ev] = generate_synthetic_stream(sc);
    std::vector<LabeledStream> test{{s, ev}};
    nn::Network spot(spotter_spec(FeatureKind::Vector), 1);
    for (auto* p : spot.params()) p->value.fill(0.0);
    spot.params().back()->value.values = {10, -10};
    DetectionModels m{FeatureKind::Vector, spot, nn::Network(classifier_spec(FeatureKind::Vector), 1)};
    const auto rep = evaluate_run(test, m, DetectorConfig{});
    CHECK(rep.phase_one.f1 == 0.0);
    CHECK(rep.phase_two.f1 == 0.0);
    CHECK(rep.phase_one.counts.fn == ev.size());
    CHECK(rep.window_counts.tn > 0);
}
