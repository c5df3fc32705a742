#include "ial/features.hpp"

#include <fstream>

#include "ial/error.hpp"

namespace ial {

ImageFeature image_feature(const SignalWindow& w, int stream_id) {
    ImageFeature img;
    img.pixels = median_downsample(w.frames, kDownsampleFactor);
    img.stream_id = stream_id;
    img.start_t = w.start_t;
    return img;
}

VectorFeature vector_feature(const ImageFeature& img) {
    VectorFeature v{};
    const auto& p = img.pixels;
    const double n = static_cast<double>(p.rows);
    for (std::size_t c = 0; c < kChannels; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r) sum += p(r, c);
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r) {
            const double d = p(r, c) - mean;
            ss += d * d;
        }
        v[c] = mean;
        v[kChannels + c] = ss / n;
    }
    return v;
}

std::vector<double> feature_values(const SignalWindow& w, FeatureKind kind) {
    auto img = image_feature(w);
    if (kind == FeatureKind::Image) return std::move(img.pixels.data);
    const auto v = vector_feature(img);
    return {v.begin(), v.end()};
}

void write_feature_dump(const std::filesystem::path& path, const std::vector<SignalWindow>& windows,
                        FeatureKind kind, int stream_id) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.precision(17);
    for (const auto& w : windows) {
        out << stream_id << ',' << w.start_t;
        for (double x : feature_values(w, kind)) out << ',' << x;
        out << '\n';
    }
}

}  // namespace ial
