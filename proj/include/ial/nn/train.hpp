#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ial/nn/network.hpp"

namespace ial::nn {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    double dropout_rate = 0.5;
    std::uint64_t seed = 1;
    double bn_eps = 1e-5;

    /// Throws InvalidConfig / InvalidRate.
    void validate() const;
};

/// Samples stored contiguously; each has shape `sample_shape`.
struct LabeledData {
    Shape sample_shape;
    std::vector<double> values;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return shape_size(sample_shape); }
    void add(std::span<const double> sample, int label);
    /// Gathers the listed samples into one [n, sample_shape...] batch.
    Tensor batch(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

struct TrainResult {
    Network network;
    /// Mean training loss of each epoch.
    std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Mini-batch momentum SGD with seeded per-epoch shuffling. A trailing batch
/// of one sample is folded into the previous batch (batchnorm needs two).
TrainResult train(const ModelSpec& spec, const LabeledData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Continues training an existing network in place.
std::vector<double> train_network(Network& net, const LabeledData& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {});

double accuracy(Network& net, const LabeledData& data);

struct GradCheckOptions {
    double step = 1e-5;
    /// Tensors larger than this are checked on a random subsample of this many entries.
    std::size_t max_per_tensor = 200;
    std::uint64_t seed = 7;
    /// Denominator floor for |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
    /// Errors at or above this trigger the kink test (and fail the check).
    double kink_threshold = 1e-4;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_param;
    /// Entries whose loss was non-smooth within one step and were re-probed.
    std::size_t kinks = 0;

    bool passed(double tolerance = 1e-4) const { return checked > 0 && max_rel_error < tolerance; }
};

/// Compares backprop against central differences of the mean batch loss.
/// Dropout is disabled; batchnorm runs in `mode` (train mode needs >= 2 samples).
/// An entry is re-probed at step/10 and step/100 only when its one-sided
/// differences disagree, i.e. the loss has a kink within one step.
GradCheckResult gradient_check(const Network& net, const Tensor& x, const std::vector<int>& labels,
                               Mode mode = Mode::Train, const GradCheckOptions& opts = {});

}  // namespace ial::nn
