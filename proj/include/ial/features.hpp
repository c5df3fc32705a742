#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "ial/signal.hpp"

namespace ial {

inline constexpr std::size_t kImageRows = kWindowFrames / kDownsampleFactor;  // 50
inline constexpr std::size_t kVectorDim = 2 * kChannels;                      // 16

enum class FeatureKind { Image, Vector };

struct ImageFeature {
    Matrix pixels;  // kImageRows x kChannels
    int stream_id = 0;
    double start_t = 0.0;
};

/// [mean_0..mean_7, var_0..var_7]; population variance.
using VectorFeature = std::array<double, kVectorDim>;

ImageFeature image_feature(const SignalWindow& w, int stream_id = 0);
VectorFeature vector_feature(const ImageFeature& img);

/// Flattened model input for either feature kind.
std::vector<double> feature_values(const SignalWindow& w, FeatureKind kind);

/// Debug dump: one row per window (stream_id, start_t, then 400 pixels or 16 values).
void write_feature_dump(const std::filesystem::path& path, const std::vector<SignalWindow>& windows,
                        FeatureKind kind, int stream_id = 0);

}  // namespace ial
