#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ial {

/// The five gestures of interest. NonInterest is only used internally by
/// the binary spotting phase and never appears in labels or detections.
enum class ActionClass : int {
    SwipeLeft = 0,
    SwipeRight = 1,
    Wave = 2,
    CircleCW = 3,
    CircleCCW = 4,
    NonInterest = 5,
};

inline constexpr int kNumInterestClasses = 5;

std::string_view class_name(ActionClass c);
/// Label-file id (1..5) <-> class. Throws UnknownLabel outside 1..5.
ActionClass class_from_label_id(int id);
int label_id(ActionClass c);
/// Parses a class name as written by class_name; nullopt if unknown.
std::optional<ActionClass> class_from_name(std::string_view name);

struct InertialSample {
    double t = 0.0;
    double ax = 0.0, ay = 0.0, az = 0.0;
    double gx = 0.0, gy = 0.0, gz = 0.0;
};

struct Stream {
    int subject_id = 1;
    int stream_id = 1;
    double sample_rate_hz = 50.0;
    std::vector<InertialSample> samples;

    std::size_t size() const { return samples.size(); }
    /// (L - 1) / rate, i.e. the span covered by the sample timestamps.
    double duration() const;
};

struct GroundTruthEvent {
    ActionClass label = ActionClass::SwipeLeft;
    double start = 0.0;
    double end = 0.0;
};

/// Zero-based CSV column index of each field.
struct ColumnSchema {
    int t = 0, ax = 1, ay = 2, az = 3, gx = 4, gy = 5, gz = 6;

    int max_index() const;
};

/// Reads a CSV stream: optional '#' comment lines, one header line, then one
/// row per sample. Rows are numbered from 1 after the header in errors.
Stream ingest_stream(const std::filesystem::path& path, const ColumnSchema& schema = {},
                     double sample_rate_hz = 50.0);

/// Writes the canonical layout (t,ax,ay,az,gx,gy,gz) with round-trip precision.
void write_stream(const std::filesystem::path& path, const Stream& stream,
                  std::string_view comment = {});

/// Parses "label_id start_s end_s" lines; blank and '#' lines are skipped.
std::vector<GroundTruthEvent> parse_labels(const std::filesystem::path& path);
std::vector<GroundTruthEvent> parse_labels_text(std::string_view text);

void write_labels(const std::filesystem::path& path, const std::vector<GroundTruthEvent>& events,
                  std::string_view comment = {});

struct LabeledStream {
    Stream stream;
    std::vector<GroundTruthEvent> events;
};

struct DatasetSplit {
    std::vector<LabeledStream> train;
    std::vector<LabeledStream> test;
};

/// Streams 1..9 of every subject train, stream 10 tests.
DatasetSplit split_dataset(std::vector<LabeledStream> streams);

struct AmplitudeRange {
    double lo = 1.0;
    double hi = 1.0;
};

struct SyntheticConfig {
    std::uint64_t seed = 1;
    double stream_duration_s = 120.0;
    double sample_rate_hz = 50.0;
    int events_per_stream = 5;
    double noise_std = 0.05;
    double event_min_s = 1.5;
    double event_max_s = 2.5;
    /// Minimum spacing between consecutive events, and from the stream ends.
    double min_gap_s = 3.0;
    std::array<AmplitudeRange, kNumInterestClasses> amplitude{{
        {0.8, 1.2}, {0.8, 1.2}, {0.8, 1.2}, {0.8, 1.2}, {0.8, 1.2},
    }};
    int subject_id = 1;
    int stream_id = 1;

    /// Throws InvalidConfig on out-of-range fields.
    void validate() const;
};

/// Seeded stream with parametric gesture templates embedded in Gaussian
/// background noise. Throws InfeasiblePacking when the events cannot fit.
std::pair<Stream, std::vector<GroundTruthEvent>> generate_synthetic_stream(const SyntheticConfig& cfg);

struct ManifestEntry {
    int subject_id = 1;
    int stream_id = 1;
    std::filesystem::path data;
    std::filesystem::path labels;
};

struct Manifest {
    double sample_rate_hz = 50.0;
    ColumnSchema schema;
    std::vector<ManifestEntry> entries;
};

/// Relative paths inside the manifest resolve against its directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest,
                    std::string_view config_hash = {});

/// Ingests every stream and label file a manifest lists.
std::vector<LabeledStream> load_manifest_streams(const Manifest& manifest);

}  // namespace ial
