#include "ial/nn/checkpoint.hpp"

#include <fstream>

#include "ial/error.hpp"

namespace ial::nn {

nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
    return {{"variant", to_string(spec.variant)},
            {"input_shape", spec.input_shape},
            {"num_classes", spec.num_classes},
            {"conv_filters", spec.conv_filters},
            {"kernel_size", spec.kernel_size},
            {"hidden_units", spec.hidden_units},
            {"hidden_layers", spec.hidden_layers},
            {"dropout_rate", spec.dropout_rate},
            {"bn_eps", spec.bn_eps},
            {"bn_momentum", spec.bn_momentum}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.variant = model_variant_from_string(j.at("variant").get<std::string>());
    s.input_shape = j.at("input_shape").get<Shape>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.conv_filters = j.at("conv_filters").get<std::vector<std::size_t>>();
    s.kernel_size = j.at("kernel_size").get<std::size_t>();
    s.hidden_units = j.at("hidden_units").get<std::size_t>();
    s.hidden_layers = j.at("hidden_layers").get<std::size_t>();
    s.dropout_rate = j.at("dropout_rate").get<double>();
    s.bn_eps = j.at("bn_eps").get<double>();
    s.bn_momentum = j.at("bn_momentum").get<double>();
    return s;
}

void save_checkpoint(const std::filesystem::path& path, Network& net, const std::string& config_hash) {
    nlohmann::ordered_json j;
    j["format"] = "ial-checkpoint";
    j["version"] = kCheckpointVersion;
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    j["spec"] = spec_to_json(net.spec());
    auto& tensors = j["tensors"] = nlohmann::ordered_json::array();
    for (const auto& s : net.state()) {
        tensors.push_back({{"name", s.name}, {"shape", s.tensor->shape}, {"values", s.tensor->values}});
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path, const std::optional<ModelSpec>& expected) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingCheckpoint, path.string());
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format") != "ial-checkpoint") throw Error(ErrorCode::CheckpointMismatch, "not a checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw Error(ErrorCode::CheckpointMismatch, "unsupported version " + j.at("version").dump());
        }
        const ModelSpec spec = spec_from_json(j.at("spec"));
        if (expected && !(*expected == spec)) {
            throw Error(ErrorCode::CheckpointMismatch, path.string() + " stores a different model spec");
        }
        Network net(spec, 0);
        auto state = net.state();
        const auto& tensors = j.at("tensors");
        if (tensors.size() != state.size()) {
            throw Error(ErrorCode::CheckpointMismatch, "tensor count " + std::to_string(tensors.size()) +
                                                           " vs " + std::to_string(state.size()));
        }
        for (std::size_t i = 0; i < state.size(); ++i) {
            const auto& t = tensors[i];
            const auto name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<Shape>();
            if (name != state[i].name || shape != state[i].tensor->shape) {
                throw Error(ErrorCode::CheckpointMismatch, "tensor " + name + " " + shape_string(shape) +
                                                               " does not match " + state[i].name + " " +
                                                               shape_string(state[i].tensor->shape));
            }
            auto values = t.at("values").get<std::vector<double>>();
            if (values.size() != shape_size(shape)) {
                throw Error(ErrorCode::CheckpointMismatch, "tensor " + name + " value count");
            }
            state[i].tensor->values = std::move(values);
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CheckpointMismatch, path.string() + ": " + e.what());
    }
}

}  // namespace ial::nn
