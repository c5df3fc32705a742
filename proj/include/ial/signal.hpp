#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ial/inertial_io.hpp"

namespace ial {

inline constexpr std::size_t kWindowFrames = 150;
inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kDownsampleFactor = 3;
inline constexpr std::size_t kDefaultStrideFrames = 15;

/// Channel order of every 8-channel frame.
enum Channel : std::size_t { kAx = 0, kAy, kAz, kAmag, kGx, kGy, kGz, kGmag };

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

struct ChannelStats {
    double min = 0.0;
    double max = 0.0;
};

using NormalizationStats = std::array<ChannelStats, kChannels>;

struct SignalWindow {
    Matrix frames;  // kWindowFrames x kChannels, normalized to [0,1]
    std::size_t start_frame = 0;
    double start_t = 0.0;
    double frame_period = 0.02;
    NormalizationStats stats{};

    double duration() const { return static_cast<double>(frames.rows) * frame_period; }
};

/// Euclidean norm of a 3-vector. Throws NonFiniteInput.
double magnitude(double x, double y, double z);

/// (x - min) / (max - min); a degenerate channel (max == min) maps to 0.5.
std::vector<double> minmax_normalize(std::span<const double> channel, ChannelStats stats);

/// Replaces each non-overlapping run of `factor` rows by its per-column
/// median. Throws LengthNotDivisible when rows % factor != 0.
Matrix median_downsample(const Matrix& m, std::size_t factor = kDownsampleFactor);

/// Builds the raw 8-channel frames (with magnitudes) for a span of samples.
Matrix eight_channel_frames(std::span<const InertialSample> samples);

/// One normalized 150x8 window beginning at start_frame. Throws OutOfRange.
SignalWindow make_window(const Stream& stream, std::size_t start_frame);

/// Number of windows slide_windows would produce; throws StreamTooShort.
std::size_t window_count(std::size_t stream_length, std::size_t stride_frames);

/// Windows at start frames 0, s, 2s, ...; throws StreamTooShort.
std::vector<SignalWindow> slide_windows(const Stream& stream, std::size_t stride_frames = kDefaultStrideFrames);

}  // namespace ial
