#include "ial/inertial_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "ial/error.hpp"
#include "ial/rng.hpp"

namespace ial {

namespace {

constexpr std::array<std::string_view, kNumInterestClasses> kClassNames = {
    "SwipeLeft", "SwipeRight", "Wave", "CircleCW", "CircleCCW"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool is_comment_or_blank(std::string_view line) {
    line = trim(line);
    return line.empty() || line.front() == '#';
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

void sort_and_check_events(std::vector<GroundTruthEvent>& events) {
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].start < events[i - 1].end) {
            throw Error(ErrorCode::OverlappingEvents,
                        "[" + format_double(events[i - 1].start) + ", " + format_double(events[i - 1].end) +
                            "] overlaps [" + format_double(events[i].start) + ", " +
                            format_double(events[i].end) + "]");
        }
    }
}

}  // namespace

std::string_view class_name(ActionClass c) {
    const int i = static_cast<int>(c);
    if (i >= 0 && i < kNumInterestClasses) return kClassNames[static_cast<std::size_t>(i)];
    return "NonInterest";
}

ActionClass class_from_label_id(int id) {
    if (id < 1 || id > kNumInterestClasses) {
        throw Error(ErrorCode::UnknownLabel, "label id " + std::to_string(id) + " not in 1..5");
    }
    return static_cast<ActionClass>(id - 1);
}

int label_id(ActionClass c) { return static_cast<int>(c) + 1; }

std::optional<ActionClass> class_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == name) return static_cast<ActionClass>(i);
    }
    return std::nullopt;
}

double Stream::duration() const {
    if (samples.size() < 2) return 0.0;
    return static_cast<double>(samples.size() - 1) / sample_rate_hz;
}

int ColumnSchema::max_index() const { return std::max({t, ax, ay, az, gx, gy, gz}); }

Stream ingest_stream(const std::filesystem::path& path, const ColumnSchema& schema, double sample_rate_hz) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
    if (std::min({schema.t, schema.ax, schema.ay, schema.az, schema.gx, schema.gy, schema.gz}) < 0) {
        throw Error(ErrorCode::InvalidConfig, "negative column index in schema");
    }
    auto in = open_input(path);

    Stream stream;
    stream.sample_rate_hz = sample_rate_hz;
    std::string line;
    bool header_seen = false;
    std::size_t row = 0;
    const auto width = static_cast<std::size_t>(schema.max_index()) + 1;
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++row;
        const auto fields = split_fields(line, ',');
        if (fields.size() < width) throw MalformedRowError(row, "expected at least " + std::to_string(width) + " columns");
        auto field = [&](int col) {
            const auto v = parse_double(fields[static_cast<std::size_t>(col)]);
            if (!v || !std::isfinite(*v)) {
                throw MalformedRowError(row, "non-numeric or non-finite value in column " + std::to_string(col + 1));
            }
            return *v;
        };
        InertialSample s;
        s.t = field(schema.t);
        s.ax = field(schema.ax);
        s.ay = field(schema.ay);
        s.az = field(schema.az);
        s.gx = field(schema.gx);
        s.gy = field(schema.gy);
        s.gz = field(schema.gz);
        if (s.t < 0.0) throw MalformedRowError(row, "negative timestamp");
        if (!stream.samples.empty() && s.t < stream.samples.back().t) {
            throw Error(ErrorCode::NonMonotoneTimestamps, "row " + std::to_string(row));
        }
        stream.samples.push_back(s);
    }
    return stream;
}

void write_stream(const std::filesystem::path& path, const Stream& stream, std::string_view comment) {
    auto out = open_output(path);
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "t,ax,ay,az,gx,gy,gz\n";
    for (const auto& s : stream.samples) {
        out << format_double(s.t) << ',' << format_double(s.ax) << ',' << format_double(s.ay) << ','
            << format_double(s.az) << ',' << format_double(s.gx) << ',' << format_double(s.gy) << ','
            << format_double(s.gz) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::vector<GroundTruthEvent> parse_labels_text(std::string_view text) {
    std::vector<GroundTruthEvent> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = text.find('\n', pos);
        const auto line = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        pos = next == std::string_view::npos ? text.size() + 1 : next + 1;
        ++line_no;
        if (is_comment_or_blank(line)) continue;

        const auto fields = split_whitespace(line);
        if (fields.size() != 3) throw MalformedRowError(line_no, "expected 'label_id start_s end_s'");
        int id = 0;
        const auto id_field = fields[0];
        auto [ptr, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), id);
        if (ec != std::errc() || ptr != id_field.data() + id_field.size()) {
            throw Error(ErrorCode::UnknownLabel, "line " + std::to_string(line_no) + ": '" + std::string(id_field) + "'");
        }
        const auto start = parse_double(fields[1]);
        const auto end = parse_double(fields[2]);
        if (!start || !end || !std::isfinite(*start) || !std::isfinite(*end)) {
            throw MalformedRowError(line_no, "bad interval bounds");
        }
        GroundTruthEvent ev{class_from_label_id(id), *start, *end};
        if (ev.start >= ev.end) {
            throw Error(ErrorCode::InvertedInterval, "line " + std::to_string(line_no));
        }
        events.push_back(ev);
    }
    sort_and_check_events(events);
    return events;
}

std::vector<GroundTruthEvent> parse_labels(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_labels_text(buf.str());
}

void write_labels(const std::filesystem::path& path, const std::vector<GroundTruthEvent>& events,
                  std::string_view comment) {
    auto out = open_output(path);
    if (!comment.empty()) out << "# " << comment << '\n';
    for (const auto& ev : events) {
        out << label_id(ev.label) << ' ' << format_double(ev.start) << ' ' << format_double(ev.end) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

DatasetSplit split_dataset(std::vector<LabeledStream> streams) {
    DatasetSplit split;
    for (auto& s : streams) {
        if (s.stream.stream_id <= 9) {
            split.train.push_back(std::move(s));
        } else {
            split.test.push_back(std::move(s));
        }
    }
    return split;
}

void SyntheticConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(stream_duration_s > 0.0)) fail("stream_duration_s must be positive");
    if (!(sample_rate_hz > 0.0)) fail("sample_rate_hz must be positive");
    if (events_per_stream < 0) fail("events_per_stream must be >= 0");
    if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
    if (!(event_min_s > 0.0) || event_max_s < event_min_s) fail("event duration range invalid");
    if (!(min_gap_s >= 1.0)) fail("min_gap_s must be >= 1");
    for (const auto& a : amplitude) {
        if (!(a.lo > 0.0) || a.hi < a.lo) fail("amplitude range invalid");
    }
}

std::pair<Stream, std::vector<GroundTruthEvent>> generate_synthetic_stream(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const auto n_samples = static_cast<std::size_t>(std::llround(cfg.stream_duration_s * cfg.sample_rate_hz));
    Stream stream;
    stream.subject_id = cfg.subject_id;
    stream.stream_id = cfg.stream_id;
    stream.sample_rate_hz = cfg.sample_rate_hz;
    stream.samples.resize(n_samples);
    const double span = stream.duration();

    // Event classes cycle through shuffled permutations so every class is
    // represented as evenly as the event count allows.
    std::vector<ActionClass> classes;
    while (static_cast<int>(classes.size()) < cfg.events_per_stream) {
        std::array<ActionClass, kNumInterestClasses> perm{ActionClass::SwipeLeft, ActionClass::SwipeRight,
                                                          ActionClass::Wave, ActionClass::CircleCW,
                                                          ActionClass::CircleCCW};
        rng.shuffle(perm.begin(), perm.end());
        for (auto c : perm) {
            if (static_cast<int>(classes.size()) < cfg.events_per_stream) classes.push_back(c);
        }
    }

    const auto n_events = static_cast<std::size_t>(cfg.events_per_stream);
    std::vector<double> durations(n_events);
    double total = 0.0;
    for (auto& d : durations) {
        d = rng.uniform(cfg.event_min_s, cfg.event_max_s);
        total += d;
    }
    const double slack = span - total - cfg.min_gap_s * static_cast<double>(n_events + 1);
    if (n_events > 0 && slack < 0.0) {
        throw Error(ErrorCode::InfeasiblePacking,
                    std::to_string(n_events) + " events need " +
                        format_double(total + cfg.min_gap_s * static_cast<double>(n_events + 1)) + " s, stream spans " +
                        format_double(span) + " s");
    }

    // Sorted uniform offsets distribute the slack among the n+1 gaps.
    std::vector<double> offsets(n_events);
    for (auto& o : offsets) o = rng.uniform(0.0, slack);
    std::sort(offsets.begin(), offsets.end());

    std::vector<GroundTruthEvent> events(n_events);
    std::vector<double> amplitudes(n_events);
    double cursor = 0.0;
    for (std::size_t i = 0; i < n_events; ++i) {
        const double start = offsets[i] + cfg.min_gap_s * static_cast<double>(i + 1) + cursor;
        events[i] = {classes[i], start, start + durations[i]};
        cursor += durations[i];
        const auto& range = cfg.amplitude[static_cast<std::size_t>(classes[i])];
        amplitudes[i] = rng.uniform(range.lo, range.hi);
    }

    for (std::size_t k = 0; k < n_samples; ++k) {
        auto& s = stream.samples[k];
        s.t = static_cast<double>(k) / cfg.sample_rate_hz;
        if (cfg.noise_std > 0.0) {
            s.ax = rng.normal(0.0, cfg.noise_std);
            s.ay = rng.normal(0.0, cfg.noise_std);
            s.az = rng.normal(0.0, cfg.noise_std);
            s.gx = rng.normal(0.0, cfg.noise_std);
            s.gy = rng.normal(0.0, cfg.noise_std);
            s.gz = rng.normal(0.0, cfg.noise_std);
        }
    }

    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n_events; ++i) {
        const auto& ev = events[i];
        const double amp = amplitudes[i];
        const auto first = static_cast<std::size_t>(std::ceil(ev.start * cfg.sample_rate_hz));
        for (std::size_t k = first; k < n_samples && stream.samples[k].t <= ev.end; ++k) {
            auto& s = stream.samples[k];
            const double u = (s.t - ev.start) / (ev.end - ev.start);
            const double envelope = std::sin(std::numbers::pi * u);
            switch (ev.label) {
                case ActionClass::SwipeLeft: s.ax -= amp * envelope; break;
                case ActionClass::SwipeRight: s.ax += amp * envelope; break;
                case ActionClass::Wave: s.gz += amp * std::sin(3.0 * two_pi * u); break;
                // Circles: gx/gy in quadrature under a half-sine envelope;
                // clockwise has gy leading gx, counter-clockwise the reverse.
                case ActionClass::CircleCW:
                    s.gx += amp * envelope * std::sin(two_pi * u);
                    s.gy += amp * envelope * std::cos(two_pi * u);
                    break;
                case ActionClass::CircleCCW:
                    s.gx += amp * envelope * std::cos(two_pi * u);
                    s.gy += amp * envelope * std::sin(two_pi * u);
                    break;
                case ActionClass::NonInterest: break;
            }
        }
    }

    return {std::move(stream), std::move(events)};
}

Manifest read_manifest(const std::filesystem::path& path) {
    auto in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "manifest " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    Manifest m;
    try {
        m.sample_rate_hz = j.value("sample_rate_hz", 50.0);
        if (j.contains("schema")) {
            const auto& s = j.at("schema");
            m.schema.t = s.value("t", m.schema.t);
            m.schema.ax = s.value("ax", m.schema.ax);
            m.schema.ay = s.value("ay", m.schema.ay);
            m.schema.az = s.value("az", m.schema.az);
            m.schema.gx = s.value("gx", m.schema.gx);
            m.schema.gy = s.value("gy", m.schema.gy);
            m.schema.gz = s.value("gz", m.schema.gz);
        }
        for (const auto& e : j.at("streams")) {
            ManifestEntry entry;
            entry.subject_id = e.at("subject").get<int>();
            entry.stream_id = e.at("stream").get<int>();
            entry.data = resolve(e.at("data").get<std::string>());
            entry.labels = resolve(e.at("labels").get<std::string>());
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "manifest " + path.string() + ": " + e.what());
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest, std::string_view config_hash) {
    nlohmann::ordered_json j;
    if (!config_hash.empty()) j["config_hash"] = std::string(config_hash);
    j["sample_rate_hz"] = manifest.sample_rate_hz;
    j["schema"] = {{"t", manifest.schema.t},   {"ax", manifest.schema.ax}, {"ay", manifest.schema.ay},
                   {"az", manifest.schema.az}, {"gx", manifest.schema.gx}, {"gy", manifest.schema.gy},
                   {"gz", manifest.schema.gz}};
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return (base.empty() ? p : std::filesystem::relative(p, base)).generic_string();
    };
    j["streams"] = nlohmann::ordered_json::array();
    for (const auto& e : manifest.entries) {
        j["streams"].push_back(
            {{"subject", e.subject_id}, {"stream", e.stream_id}, {"data", rel(e.data)}, {"labels", rel(e.labels)}});
    }
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

std::vector<LabeledStream> load_manifest_streams(const Manifest& manifest) {
    std::vector<LabeledStream> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        LabeledStream ls;
        ls.stream = ingest_stream(e.data, manifest.schema, manifest.sample_rate_hz);
        ls.stream.subject_id = e.subject_id;
        ls.stream.stream_id = e.stream_id;
        ls.events = parse_labels(e.labels);
        out.push_back(std::move(ls));
    }
    return out;
}

}  // namespace ial
