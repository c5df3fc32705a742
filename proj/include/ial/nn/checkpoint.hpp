#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "ial/nn/network.hpp"

namespace ial::nn {

inline constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// JSON container: format tag, version, ModelSpec echo, then every named
/// state tensor (weights, batchnorm scale/shift and running statistics).
void save_checkpoint(const std::filesystem::path& path, Network& net, const std::string& config_hash = {});

/// Rebuilds the network from the stored spec and restores every tensor.
/// Throws MissingCheckpoint, or CheckpointMismatch when `expected` differs
/// from the stored spec or a tensor has the wrong shape.
Network load_checkpoint(const std::filesystem::path& path, const std::optional<ModelSpec>& expected = std::nullopt);

}  // namespace ial::nn
