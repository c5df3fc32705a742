#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ial/features.hpp"
#include "ial/rng.hpp"
#include "ial/signal.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ial;

namespace {

Stream ramp_stream(std::size_t n) {
    Stream s;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(i);
        s.samples.push_back({v / 50.0, v, 2 * v, -v, v, -3 * v, 0.5 * v});
    }
    return s;
}

Stream random_stream(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Stream s;
    for (std::size_t i = 0; i < n; ++i)
        s.samples.push_back({i / 50.0, rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal(),
                             rng.normal()});
    return s;
}

}  // namespace

TEST_CASE("magnitude") {
    CHECK(magnitude(3, 4, 0) == 5.0);
    CHECK(magnitude(0, 0, 0) == 0.0);
    CHECK(magnitude(1, 2, 2) == 3.0);
    CHECK_ERROR_CODE(magnitude(std::numeric_limits<double>::quiet_NaN(), 0, 0), ErrorCode::NonFiniteInput);
    CHECK_ERROR_CODE(magnitude(0, INFINITY, 0), ErrorCode::NonFiniteInput);

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.normal(0, 5), y = rng.normal(0, 5), z = rng.normal(0, 5);
        const double m = magnitude(x, y, z);
        CHECK(m >= 0.0);
        CHECK(magnitude(-x, -y, -z) == m);
        CHECK(magnitude(z, x, y) == doctest::Approx(m).epsilon(1e-14));
        CHECK(m <= std::abs(x) + std::abs(y) + std::abs(z) + 1e-12);
    }
}

TEST_CASE("minmax_normalize") {
    const std::vector<double> x{2, 4, 6};
    const auto y = minmax_normalize(x, {2, 6});
    CHECK(y == std::vector<double>{0.0, 0.5, 1.0});

    const std::vector<double> c{7, 7, 7};
    CHECK(minmax_normalize(c, {7, 7}) == std::vector<double>{0.5, 0.5, 0.5});
}

TEST_CASE("median_downsample") {
    SUBCASE("examples") {
        Matrix m(3, 1);
        m(0, 0) = 5; m(1, 0) = 1; m(2, 0) = 3;
        CHECK(median_downsample(m)(0, 0) == 3.0);

        Matrix d(6, 1);
        const double v[] = {1, 1, 9, 2, 8, 2};
        for (int i = 0; i < 6; ++i) d(i, 0) = v[i];
        const auto out = median_downsample(d);
        REQUIRE(out.rows == 2);
        CHECK(out(0, 0) == 1.0);
        CHECK(out(1, 0) == 2.0);
    }
    SUBCASE("length not divisible") {
        CHECK_ERROR_CODE(median_downsample(Matrix(4, 2)), ErrorCode::LengthNotDivisible);
    }
    SUBCASE("matches sort oracle and stays within each triple") {
        Rng rng(11);
        for (int trial = 0; trial < 100; ++trial) {
            Matrix m(150, 8);
            for (auto& x : m.data) x = rng.uniform() < 0.2 ? std::round(rng.uniform(0, 3)) : rng.normal();
            const auto got = median_downsample(m);
            const auto want = oracle::median3_by_sort(m);
            CHECK(got == want);
            for (std::size_t r = 0; r < got.rows; ++r)
                for (std::size_t c = 0; c < 8; ++c) {
                    const double a = m(3 * r, c), b = m(3 * r + 1, c), d = m(3 * r + 2, c);
                    CHECK(got(r, c) >= std::min({a, b, d}));
                    CHECK(got(r, c) <= std::max({a, b, d}));
                }
        }
    }
    SUBCASE("general factor") {
        Matrix m(5, 1);
        const double v[] = {4, 1, 5, 2, 3};
        for (int i = 0; i < 5; ++i) m(i, 0) = v[i];
        CHECK(median_downsample(m, 5)(0, 0) == 3.0);
    }
}

TEST_CASE("make_window normalizes per window and channel") {
    const Stream s = ramp_stream(150);
    const auto w = make_window(s, 0);
    REQUIRE(w.frames.rows == kWindowFrames);
    REQUIRE(w.frames.cols == kChannels);
    for (std::size_t k = 0; k < 150; ++k) {
        CHECK(w.frames(k, kAx) == doctest::Approx(k / 149.0).epsilon(1e-12));
        CHECK(w.frames(k, kAz) == doctest::Approx(1.0 - k / 149.0).epsilon(1e-12));
    }
    CHECK(w.start_t == 0.0);

    Stream zero;
    for (int i = 0; i < 150; ++i) zero.samples.push_back({i / 50.0, 0, 0, 0, 0, 0, 0});
    const auto z = make_window(zero, 0);
    CHECK(std::all_of(z.frames.data.begin(), z.frames.data.end(), [](double v) { return v == 0.5; }));

    CHECK_ERROR_CODE(make_window(s, 1), ErrorCode::OutOfRange);
}

TEST_CASE("make_window extremes map to 0 and 1") {
    const Stream s = random_stream(400, 5);
    const auto w = make_window(s, 37);
    const auto raw = eight_channel_frames(std::span(s.samples).subspan(37, 150));
    for (std::size_t c = 0; c < kChannels; ++c) {
        std::size_t lo = 0, hi = 0;
        double mn = 2, mx = -1;
        for (std::size_t k = 0; k < 150; ++k) {
            CHECK(w.frames(k, c) >= 0.0);
            CHECK(w.frames(k, c) <= 1.0);
            if (w.frames(k, c) < mn) mn = w.frames(k, c);
            if (w.frames(k, c) > mx) mx = w.frames(k, c);
        }
        for (std::size_t k = 0; k < 150; ++k) {
            if (raw(k, c) < raw(lo, c)) lo = k;
            if (raw(k, c) > raw(hi, c)) hi = k;
        }
        CHECK(w.frames(lo, c) == 0.0);
        CHECK(w.frames(hi, c) == 1.0);
    }
    CHECK(w.start_t == s.samples[37].t);
}

TEST_CASE("window_count and slide_windows") {
    CHECK(window_count(150, 15) == 1);
    CHECK(window_count(6000, 15) == 391);
    CHECK(window_count(164, 15) == 1);
    CHECK(window_count(165, 15) == 2);
    CHECK_ERROR_CODE(window_count(149, 15), ErrorCode::StreamTooShort);
    CHECK_ERROR_CODE(window_count(200, 0), ErrorCode::InvalidConfig);

    const Stream s = random_stream(6000, 1);
    const auto ws = slide_windows(s);
    REQUIRE(ws.size() == 391);
    for (std::size_t i = 0; i < ws.size(); ++i) CHECK(ws[i].start_frame == 15 * i);
    CHECK_ERROR_CODE(slide_windows(random_stream(100, 1)), ErrorCode::StreamTooShort);
}

TEST_CASE("image feature") {
    Stream s;
    for (int i = 0; i < 150; ++i) s.samples.push_back({i / 50.0, 1, 1, 1, 1, 1, 1});
    const auto img = image_feature(make_window(s, 0), 4);
    CHECK(img.pixels.rows == kImageRows);
    CHECK(img.pixels.cols == kChannels);
    CHECK(img.stream_id == 4);
    CHECK(std::all_of(img.pixels.data.begin(), img.pixels.data.end(), [](double v) { return v == 0.5; }));

    for (int seed = 0; seed < 20; ++seed) {
        const auto rs = random_stream(150, static_cast<std::uint64_t>(seed));
        const auto w = make_window(rs, 0);
        const auto im = image_feature(w);
        CHECK(im.pixels == oracle::median3_by_sort(w.frames));
    }
}

TEST_CASE("vector feature") {
    ImageFeature img;
    img.pixels = Matrix(kImageRows, kChannels);
    for (std::size_t r = 0; r < kImageRows; ++r)
        for (std::size_t c = 0; c < kChannels; ++c) img.pixels(r, c) = static_cast<double>(r % 2);
    const auto v = vector_feature(img);
    for (std::size_t c = 0; c < kChannels; ++c) {
        CHECK(v[c] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(v[kChannels + c] == doctest::Approx(0.25).epsilon(1e-15));
    }

    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        for (auto& x : img.pixels.data) x = rng.uniform();
        const auto f = vector_feature(img);
        for (std::size_t c = 0; c < kChannels; ++c) {
            double mean = 0;
            for (std::size_t r = 0; r < kImageRows; ++r) mean += img.pixels(r, c);
            mean /= kImageRows;
            double var = 0;
            for (std::size_t r = 0; r < kImageRows; ++r) var += (img.pixels(r, c) - mean) * (img.pixels(r, c) - mean);
            var /= kImageRows;
            CHECK(std::abs(f[c] - mean) <= 1e-12);
            CHECK(std::abs(f[kChannels + c] - var) <= 1e-12);
            CHECK(f[kChannels + c] >= 0.0);
            CHECK(f[kChannels + c] <= 0.25);
        }
        // row order does not matter
        ImageFeature shuffled = img;
        std::vector<std::size_t> order(kImageRows);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        for (std::size_t r = 0; r < kImageRows; ++r)
            for (std::size_t c = 0; c < kChannels; ++c) shuffled.pixels(r, c) = img.pixels(order[r], c);
        const auto g = vector_feature(shuffled);
        for (std::size_t i = 0; i < kVectorDim; ++i) CHECK(std::abs(g[i] - f[i]) <= 1e-12);
    }
}

TEST_CASE("feature_values sizes and dump") {
    const auto s = random_stream(300, 9);
    const auto ws = slide_windows(s, 75);
    CHECK(feature_values(ws[0], FeatureKind::Image).size() == 400);
    CHECK(feature_values(ws[0], FeatureKind::Vector).size() == 16);
    const auto dir = scratch_dir("dump");
    write_feature_dump(dir / "f.csv", ws, FeatureKind::Vector, 3);
    const auto text = read_text(dir / "f.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') >= static_cast<long>(ws.size()));
}
