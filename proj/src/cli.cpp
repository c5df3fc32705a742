#include "ial/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ial/error.hpp"
#include "ial/nn/checkpoint.hpp"
#include "ial/parallel.hpp"

namespace ial::cli {

namespace {

constexpr const char* kSpotterCheckpoint = "spotter.ckpt.json";
constexpr const char* kClassifierCheckpoint = "classifier.ckpt.json";

std::string feature_kind_name(FeatureKind k) { return k == FeatureKind::Image ? "image" : "vector"; }

FeatureKind feature_kind_from(const std::string& s) {
    if (s == "image") return FeatureKind::Image;
    if (s == "vector") return FeatureKind::Vector;
    throw Error(ErrorCode::InvalidConfig, "feature_kind must be image or vector, got '" + s + "'");
}

std::string mode_name(ClassificationMode m) {
    return m == ClassificationMode::CenterWindow ? "center-window" : "mean-probability";
}

ClassificationMode mode_from(const std::string& s) {
    if (s == "center-window") return ClassificationMode::CenterWindow;
    if (s == "mean-probability") return ClassificationMode::MeanProbability;
    throw Error(ErrorCode::InvalidConfig, "classification_mode must be center-window or mean-probability");
}

std::string rule_name(MatchRule r) { return r == MatchRule::Midpoint ? "midpoint" : "iou"; }

MatchRule rule_from(const std::string& s) {
    if (s == "midpoint") return MatchRule::Midpoint;
    if (s == "iou") return MatchRule::IoU;
    throw Error(ErrorCode::InvalidConfig, "match_rule must be midpoint or iou");
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, section + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown key '" + item.key() + "' in " + section);
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
    return out;
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

nn::ModelSpec trained_spec(nn::ModelSpec spec, const RunConfig& cfg) {
    spec.dropout_rate = cfg.train.dropout_rate;
    spec.bn_eps = cfg.train.bn_eps;
    return spec;
}

DetectionModels load_models(const RunConfig& cfg) {
    auto spot = nn::load_checkpoint(cfg.output_dir / kSpotterCheckpoint,
                                    trained_spec(spotter_spec(cfg.feature_kind), cfg));
    auto cls = nn::load_checkpoint(cfg.output_dir / kClassifierCheckpoint,
                                   trained_spec(classifier_spec(cfg.feature_kind), cfg));
    return {cfg.feature_kind, std::move(spot), std::move(cls)};
}

WindowLabelConfig label_config(const RunConfig& cfg) {
    WindowLabelConfig w = cfg.windows;
    w.seed = mix_seed(cfg.seed, 0x11);
    return w;
}

nn::TrainConfig train_config(const RunConfig& cfg) {
    nn::TrainConfig t = cfg.train;
    t.seed = mix_seed(cfg.seed, 0x22);
    return t;
}

}  // namespace

void RunConfig::validate() const {
    const bool image_cnn = feature_kind == FeatureKind::Image && model_variant == nn::ModelVariant::Cnn;
    const bool vector_fc = feature_kind == FeatureKind::Vector && model_variant == nn::ModelVariant::Fc;
    if (!image_cnn && !vector_fc) {
        throw Error(ErrorCode::ConfigConflict, feature_kind_name(feature_kind) + " features cannot feed a " +
                                                   nn::to_string(model_variant) + " model (use image+cnn or vector+fc)");
    }
    if (threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
    if (synthetic.subjects < 1 || synthetic.streams_per_subject < 1) {
        throw Error(ErrorCode::InvalidConfig, "synthetic subjects/streams_per_subject must be >= 1");
    }
    if (windows.stride_frames < 1) throw Error(ErrorCode::InvalidConfig, "windows.stride_frames must be >= 1");
    if (!(windows.positive_overlap > 0.0 && windows.positive_overlap <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "windows.positive_overlap must be in (0,1]");
    }
    train.validate();
    detector.validate();
    synthetic.stream.validate();
}

std::filesystem::path RunConfig::manifest_path() const {
    return manifest.empty() ? output_dir / "manifest.json" : manifest;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        check_keys(j,
                   {"manifest", "output_dir", "feature_kind", "model_variant", "seed", "threads", "train", "windows",
                    "detector", "synthetic", "evaluation"},
                   "config");
        if (j.contains("manifest")) c.manifest = j.at("manifest").get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("feature_kind")) c.feature_kind = feature_kind_from(j.at("feature_kind").get<std::string>());
        if (j.contains("model_variant")) {
            c.model_variant = nn::model_variant_from_string(j.at("model_variant").get<std::string>());
        } else {
            c.model_variant = c.feature_kind == FeatureKind::Image ? nn::ModelVariant::Cnn : nn::ModelVariant::Fc;
        }
        read(j, "seed", c.seed);
        read(j, "threads", c.threads);

        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_keys(t, {"learning_rate", "momentum", "batch_size", "epochs", "dropout_rate", "bn_eps"}, "train");
            read(t, "learning_rate", c.train.learning_rate);
            read(t, "momentum", c.train.momentum);
            read(t, "batch_size", c.train.batch_size);
            read(t, "epochs", c.train.epochs);
            read(t, "dropout_rate", c.train.dropout_rate);
            read(t, "bn_eps", c.train.bn_eps);
        }
        if (j.contains("windows")) {
            const auto& w = j.at("windows");
            check_keys(w, {"stride_frames", "positive_overlap", "balance"}, "windows");
            read(w, "stride_frames", c.windows.stride_frames);
            read(w, "positive_overlap", c.windows.positive_overlap);
            read(w, "balance", c.windows.balance);
        }
        if (j.contains("detector")) {
            const auto& d = j.at("detector");
            check_keys(d,
                       {"interest_threshold", "min_event_windows", "merge_gap_windows", "stride_frames",
                        "classification_mode"},
                       "detector");
            read(d, "interest_threshold", c.detector.interest_threshold);
            read(d, "min_event_windows", c.detector.min_event_windows);
            read(d, "merge_gap_windows", c.detector.merge_gap_windows);
            read(d, "stride_frames", c.detector.stride_frames);
            if (d.contains("classification_mode")) {
                c.detector.classification_mode = mode_from(d.at("classification_mode").get<std::string>());
            }
        }
        if (j.contains("synthetic")) {
            const auto& s = j.at("synthetic");
            check_keys(s,
                       {"subjects", "streams_per_subject", "stream_duration_s", "sample_rate_hz", "events_per_stream",
                        "noise_std", "event_min_s", "event_max_s", "min_gap_s", "amplitude"},
                       "synthetic");
            auto& st = c.synthetic.stream;
            read(s, "subjects", c.synthetic.subjects);
            read(s, "streams_per_subject", c.synthetic.streams_per_subject);
            read(s, "stream_duration_s", st.stream_duration_s);
            read(s, "sample_rate_hz", st.sample_rate_hz);
            read(s, "events_per_stream", st.events_per_stream);
            read(s, "noise_std", st.noise_std);
            read(s, "event_min_s", st.event_min_s);
            read(s, "event_max_s", st.event_max_s);
            read(s, "min_gap_s", st.min_gap_s);
            if (s.contains("amplitude")) {
                const auto& a = s.at("amplitude");
                if (!a.is_array() || a.size() != st.amplitude.size()) {
                    throw Error(ErrorCode::InvalidConfig, "synthetic.amplitude needs 5 [lo, hi] pairs");
                }
                for (std::size_t i = 0; i < st.amplitude.size(); ++i) {
                    st.amplitude[i] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
                }
            }
        }
        if (j.contains("evaluation")) {
            const auto& e = j.at("evaluation");
            check_keys(e, {"match_rule"}, "evaluation");
            if (e.contains("match_rule")) c.match_rule = rule_from(e.at("match_rule").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    return c;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["manifest"] = c.manifest.generic_string();
    j["output_dir"] = c.output_dir.generic_string();
    j["feature_kind"] = feature_kind_name(c.feature_kind);
    j["model_variant"] = nn::to_string(c.model_variant);
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["train"] = {{"learning_rate", c.train.learning_rate}, {"momentum", c.train.momentum},
                  {"batch_size", c.train.batch_size},       {"epochs", c.train.epochs},
                  {"dropout_rate", c.train.dropout_rate},   {"bn_eps", c.train.bn_eps}};
    j["windows"] = {{"stride_frames", c.windows.stride_frames},
                    {"positive_overlap", c.windows.positive_overlap},
                    {"balance", c.windows.balance}};
    j["detector"] = {{"interest_threshold", c.detector.interest_threshold},
                     {"min_event_windows", c.detector.min_event_windows},
                     {"merge_gap_windows", c.detector.merge_gap_windows},
                     {"stride_frames", c.detector.stride_frames},
                     {"classification_mode", mode_name(c.detector.classification_mode)}};
    const auto& st = c.synthetic.stream;
    nlohmann::ordered_json amp = nlohmann::ordered_json::array();
    for (const auto& a : st.amplitude) amp.push_back({a.lo, a.hi});
    j["synthetic"] = {{"subjects", c.synthetic.subjects},
                      {"streams_per_subject", c.synthetic.streams_per_subject},
                      {"stream_duration_s", st.stream_duration_s},
                      {"sample_rate_hz", st.sample_rate_hz},
                      {"events_per_stream", st.events_per_stream},
                      {"noise_std", st.noise_std},
                      {"event_min_s", st.event_min_s},
                      {"event_max_s", st.event_max_s},
                      {"min_gap_s", st.min_gap_s},
                      {"amplitude", amp}};
    j["evaluation"] = {{"match_rule", rule_name(c.match_rule)}};
    return j;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::InvalidConfig, "override '" + assignment + "' is not key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;
    }
    nlohmann::json* node = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

std::string config_hash(const RunConfig& cfg) {
    // Where results go and how many threads compute them do not change them.
    auto j = config_to_json(cfg);
    j.erase("output_dir");
    j.erase("threads");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig:
        case ErrorCode::ConfigConflict:
        case ErrorCode::InfeasiblePacking:
        case ErrorCode::InvalidRate:
            return kUsageError;
        default:
            return kDataError;
    }
}

// ---------------------------------------------------------------- commands

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    const std::string tag = "config_hash=" + hash;
    const auto dir = cfg.output_dir;

    Manifest manifest;
    manifest.sample_rate_hz = cfg.synthetic.stream.sample_rate_hz;
    for (int subject = 1; subject <= cfg.synthetic.subjects; ++subject) {
        for (int stream = 1; stream <= cfg.synthetic.streams_per_subject; ++stream) {
            SyntheticConfig sc = cfg.synthetic.stream;
            sc.subject_id = subject;
            sc.stream_id = stream;
            sc.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(subject * 1000 + stream));
            const auto [s, events] = generate_synthetic_stream(sc);

            char stem[64];
            std::snprintf(stem, sizeof(stem), "s%02d_t%02d", subject, stream);
            ManifestEntry e{subject, stream, dir / (std::string(stem) + ".csv"),
                            dir / (std::string(stem) + ".labels")};
            write_stream(e.data, s, tag);
            write_labels(e.labels, events, tag);
            manifest.entries.push_back(std::move(e));
        }
    }
    const auto manifest_path = dir / "manifest.json";
    write_manifest(manifest_path, manifest, hash);
    log << "synth: wrote " << manifest.entries.size() << " streams and " << manifest_path.string() << '\n';
    return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    const auto manifest = read_manifest(cfg.manifest_path());
    auto split = split_dataset(load_manifest_streams(manifest));
    if (split.train.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no training streams (ids 1..9)");

    log << "train: " << split.train.size() << " streams, " << feature_kind_name(cfg.feature_kind) << " features\n";
    const auto train_cfg = train_config(cfg);
    const auto label_cfg = label_config(cfg);
    auto trained = train_detection_models(split.train, cfg.feature_kind, train_cfg, label_cfg);

    std::filesystem::create_directories(cfg.output_dir);
    nn::save_checkpoint(cfg.output_dir / kSpotterCheckpoint, trained.models.spotter, hash);
    nn::save_checkpoint(cfg.output_dir / kClassifierCheckpoint, trained.models.classifier, hash);
    auto write_curve = [&](const char* name, const std::vector<double>& curve) {
        auto out = open_out(cfg.output_dir / name);
        out << "# config_hash=" << hash << '\n' << "epoch,mean_loss\n";
        for (std::size_t e = 0; e < curve.size(); ++e) out << e + 1 << ',' << fixed(curve[e], 10) << '\n';
    };
    write_curve("loss_spotter.csv", trained.spotter_loss);
    write_curve("loss_classifier.csv", trained.classifier_loss);
    log << "train: spotter final loss " << fixed(trained.spotter_loss.back()) << ", classifier final loss "
        << fixed(trained.classifier_loss.back()) << '\n';
    return kOk;
}

int cmd_detect(const RunConfig& cfg, const std::filesystem::path& stream_path, std::ostream& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    double rate = cfg.synthetic.stream.sample_rate_hz;
    ColumnSchema schema;
    if (std::filesystem::exists(cfg.manifest_path())) {
        const auto m = read_manifest(cfg.manifest_path());
        rate = m.sample_rate_hz;
        schema = m.schema;
    }
    const Stream stream = ingest_stream(stream_path, schema, rate);
    auto models = load_models(cfg);
    const auto events = detect(stream, models, cfg.detector);

    auto tsv = open_out(cfg.output_dir / "events.tsv");
    tsv << "# config_hash=" << hash << " stream=" << stream_path.filename().string() << '\n';
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["stream"] = stream_path.filename().string();
    j["events"] = nlohmann::ordered_json::array();
    for (const auto& e : events) {
        tsv << class_name(e.label) << '\t' << fixed(e.start) << '\t' << fixed(e.end) << '\t' << fixed(e.confidence)
            << '\n';
        j["events"].push_back({{"label", class_name(e.label)},
                               {"label_id", label_id(e.label)},
                               {"start_s", e.start},
                               {"end_s", e.end},
                               {"confidence", e.confidence}});
    }
    open_out(cfg.output_dir / "events.json") << j.dump(2) << '\n';
    log << "detect: " << events.size() << " events -> " << (cfg.output_dir / "events.tsv").string() << '\n';
    return kOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    const auto manifest = read_manifest(cfg.manifest_path());
    const auto split = split_dataset(load_manifest_streams(manifest));
    auto models = load_models(cfg);
    const auto report = evaluate_run(split.test, models, cfg.detector, cfg.match_rule);

    const std::string model = cfg.feature_kind == FeatureKind::Image ? "Convolution Neural Network"
                                                                     : "Fully Connected Neural Network";
    std::string text = format_table("Performance on Phase One", {{model, report.phase_one}}) + "\n" +
                       format_table("Performance on Phase Two", {{model, report.phase_two}});
    text += "\nconfig_hash " + hash + "\n";
    open_out(cfg.output_dir / "report.txt") << text;

    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["config"] = config_to_json(cfg);
    j["results"] = to_json(report);
    open_out(cfg.output_dir / "report.json") << j.dump(2) << '\n';
    log << text;
    return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    bool ok = true;
    Rng rng(mix_seed(cfg.seed, 0x33));
    for (const auto kind : {FeatureKind::Image, FeatureKind::Vector}) {
        for (const auto& spec : {spotter_spec(kind), classifier_spec(kind)}) {
            nn::Network net(spec, mix_seed(cfg.seed, 0x44));
            constexpr std::size_t kBatch = 4;
            nn::Tensor x(nn::batch_shape(spec, kBatch));
            for (auto& v : x.values) v = rng.uniform();
            std::vector<int> labels(kBatch);
            for (auto& y : labels) y = static_cast<int>(rng.below(spec.num_classes));
            const auto r = nn::gradient_check(net, x, labels, nn::Mode::Train);
            const bool pass = r.passed(1e-4);
            ok = ok && pass;
            log << "gradcheck " << nn::to_string(spec.variant) << " K=" << spec.num_classes << ": "
                << r.checked << " params (" << r.kinks << " kinks re-probed), max rel error " << r.max_rel_error << " (" << r.worst_param << ") "
                << (pass ? "PASS" : "FAIL") << '\n';
        }
    }
    return ok ? kOk : kVerificationFailure;
}

// ---------------------------------------------------------------- entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-phase gesture detection for continuous inertial streams"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out_dir;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON run configuration (default: $IAL_CONFIG)");
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--threads", threads, "Worker threads; 1 guarantees bit-reproducibility");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--set", overrides, "Override a config key, e.g. --set train.epochs=5");

    auto* synth = app.add_subcommand("synth", "Generate seeded synthetic streams, labels and a manifest");
    auto* train = app.add_subcommand("train", "Train the spotting and classification models");
    auto* detect_cmd = app.add_subcommand("detect", "Detect gestures in one stream file");
    std::string stream_path;
    detect_cmd->add_option("--stream", stream_path, "Stream CSV")->required();
    auto* eval = app.add_subcommand("eval", "Evaluate on the test split (stream 10 of each subject)");
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of both architectures");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kUsageError;
    }

    try {
        nlohmann::json j = nlohmann::json::object();
        if (config_path.empty()) {
            if (const char* env = std::getenv("IAL_CONFIG"); env && *env) config_path = env;
        }
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + config_path);
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::InvalidConfig, config_path + ": " + e.what());
            }
        }
        for (const auto& o : overrides) apply_override(j, o);
        if (seed) j["seed"] = *seed;
        if (threads) j["threads"] = *threads;
        if (!out_dir.empty()) j["output_dir"] = out_dir;

        const RunConfig cfg = config_from_json(j);
        cfg.validate();
        set_thread_count(cfg.threads);

        if (*synth) return cmd_synth(cfg, out);
        if (*train) return cmd_train(cfg, out);
        if (*detect_cmd) return cmd_detect(cfg, stream_path, out);
        if (*eval) return cmd_eval(cfg, out);
        if (*gradcheck) return cmd_gradcheck(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsageError;
}

}  // namespace ial::cli
