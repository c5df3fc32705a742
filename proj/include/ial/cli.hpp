#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ial/detector.hpp"
#include "ial/error.hpp"
#include "ial/evaluation.hpp"
#include "ial/inertial_io.hpp"
#include "ial/nn/train.hpp"

namespace ial::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kVerificationFailure = 3 };

struct SyntheticSetConfig {
    SyntheticConfig stream;  // seed here is ignored; per-stream seeds derive from RunConfig::seed
    int subjects = 1;
    int streams_per_subject = 10;
};

struct RunConfig {
    std::filesystem::path manifest;  // empty: <output_dir>/manifest.json
    std::filesystem::path output_dir = "out";
    FeatureKind feature_kind = FeatureKind::Image;
    nn::ModelVariant model_variant = nn::ModelVariant::Cnn;
    std::uint64_t seed = 42;
    std::size_t threads = 1;
    nn::TrainConfig train;
    WindowLabelConfig windows;
    DetectorConfig detector;
    SyntheticSetConfig synthetic;
    MatchRule match_rule = MatchRule::Midpoint;

    /// Throws ConfigConflict (image needs cnn, vector needs fc) or InvalidConfig.
    void validate() const;
    std::filesystem::path manifest_path() const;
};

/// Unknown keys are rejected; missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// Reads a JSON config file (InvalidConfig on parse errors).
RunConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides; value is parsed as JSON, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a 64 of the canonical config JSON without output_dir and threads,
/// as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_detect(const RunConfig& cfg, const std::filesystem::path& stream_path, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);

/// Maps an error kind to the documented exit code.
int exit_code_for(ErrorCode code);

/// Full entry point (argument parsing + dispatch); used by the binary and tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ial::cli
