#include "ial/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ial/error.hpp"

namespace ial {

namespace {

double median3(double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

}  // namespace

double magnitude(double x, double y, double z) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
        throw Error(ErrorCode::NonFiniteInput, "magnitude of non-finite vector");
    }
    return std::sqrt(x * x + y * y + z * z);
}

std::vector<double> minmax_normalize(std::span<const double> channel, ChannelStats stats) {
    std::vector<double> out(channel.size());
    const double range = stats.max - stats.min;
    if (!(range > 0.0)) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < channel.size(); ++i) out[i] = (channel[i] - stats.min) / range;
    return out;
}

Matrix median_downsample(const Matrix& m, std::size_t factor) {
    if (factor == 0 || m.rows % factor != 0) {
        throw Error(ErrorCode::LengthNotDivisible,
                    std::to_string(m.rows) + " rows not divisible by " + std::to_string(factor));
    }
    Matrix out(m.rows / factor, m.cols);
    if (factor == 3) {
        for (std::size_t r = 0; r < out.rows; ++r) {
            for (std::size_t c = 0; c < m.cols; ++c) {
                out(r, c) = median3(m(3 * r, c), m(3 * r + 1, c), m(3 * r + 2, c));
            }
        }
        return out;
    }
    // General odd/even factor: middle order statistic (lower middle for even).
    std::vector<double> buf(factor);
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            for (std::size_t k = 0; k < factor; ++k) buf[k] = m(factor * r + k, c);
            const auto mid = buf.begin() + static_cast<std::ptrdiff_t>((factor - 1) / 2);
            std::nth_element(buf.begin(), mid, buf.end());
            out(r, c) = *mid;
        }
    }
    return out;
}

Matrix eight_channel_frames(std::span<const InertialSample> samples) {
    Matrix m(samples.size(), kChannels);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        m(i, kAx) = s.ax;
        m(i, kAy) = s.ay;
        m(i, kAz) = s.az;
        m(i, kAmag) = magnitude(s.ax, s.ay, s.az);
        m(i, kGx) = s.gx;
        m(i, kGy) = s.gy;
        m(i, kGz) = s.gz;
        m(i, kGmag) = magnitude(s.gx, s.gy, s.gz);
    }
    return m;
}

SignalWindow make_window(const Stream& stream, std::size_t start_frame) {
    if (start_frame > stream.size() || stream.size() - start_frame < kWindowFrames) {
        throw Error(ErrorCode::OutOfRange, "window at frame " + std::to_string(start_frame) + " exceeds stream of " +
                                               std::to_string(stream.size()) + " samples");
    }
    const std::span<const InertialSample> slice(stream.samples.data() + start_frame, kWindowFrames);

    SignalWindow w;
    w.frames = eight_channel_frames(slice);
    w.start_frame = start_frame;
    w.start_t = slice.front().t;
    w.frame_period = 1.0 / stream.sample_rate_hz;

    for (std::size_t c = 0; c < kChannels; ++c) {
        ChannelStats st{w.frames(0, c), w.frames(0, c)};
        for (std::size_t r = 1; r < kWindowFrames; ++r) {
            st.min = std::min(st.min, w.frames(r, c));
            st.max = std::max(st.max, w.frames(r, c));
        }
        w.stats[c] = st;
        const double range = st.max - st.min;
        for (std::size_t r = 0; r < kWindowFrames; ++r) {
            w.frames(r, c) = range > 0.0 ? (w.frames(r, c) - st.min) / range : 0.5;
        }
    }
    return w;
}

std::size_t window_count(std::size_t stream_length, std::size_t stride_frames) {
    if (stride_frames == 0) throw Error(ErrorCode::InvalidConfig, "stride must be positive");
    if (stream_length < kWindowFrames) {
        throw Error(ErrorCode::StreamTooShort,
                    std::to_string(stream_length) + " samples < " + std::to_string(kWindowFrames));
    }
    return (stream_length - kWindowFrames) / stride_frames + 1;
}

std::vector<SignalWindow> slide_windows(const Stream& stream, std::size_t stride_frames) {
    const std::size_t n = window_count(stream.size(), stride_frames);
    std::vector<SignalWindow> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_window(stream, i * stride_frames));
    return out;
}

}  // namespace ial
