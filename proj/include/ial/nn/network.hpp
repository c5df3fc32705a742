#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ial/nn/ops.hpp"
#include "ial/nn/tensor.hpp"

namespace ial::nn {

enum class ModelVariant {
    Cnn,     // conv blocks (conv, batchnorm, relu, 2x2 max-pool), dropout, dense
    Fc,      // dense blocks (dense, batchnorm, relu), dropout, dense
    Linear,  // single dense layer; used for verification
};

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);

struct ModelSpec {
    ModelVariant variant = ModelVariant::Cnn;
    /// Per-sample input shape: {50, 8, 1} for the CNN, {16} for dense models.
    Shape input_shape{50, 8, 1};
    std::size_t num_classes = 2;
    std::vector<std::size_t> conv_filters{16, 32, 64};
    std::size_t kernel_size = 3;
    std::size_t hidden_units = 128;
    std::size_t hidden_layers = 3;
    double dropout_rate = 0.5;
    double bn_eps = 1e-5;
    double bn_momentum = 0.9;

    static ModelSpec cnn(std::size_t num_classes);
    static ModelSpec fc(std::size_t num_classes);
    static ModelSpec linear(std::size_t input_dim, std::size_t num_classes);

    bool operator==(const ModelSpec&) const = default;
};

/// A named tensor persisted in checkpoints (trainable or running statistic).
struct StateRef {
    std::string name;
    Tensor* tensor;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string name() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
    /// Batched forward; caches whatever backward needs.
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    /// Accumulates parameter gradients and returns the input gradient.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::vector<StateRef> state() { return {}; }
};

class Conv2dLayer final : public Layer {
public:
    Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, bool with_bias, Rng& rng);

    std::string name() const override { return "conv2d"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::vector<StateRef> state() override;

private:
    Param kernels_;
    Param bias_;
    bool with_bias_;
    Tensor input_;
};

class BatchNormLayer final : public Layer {
public:
    BatchNormLayer(std::size_t channels, double eps, double momentum);

    std::string name() const override { return "batchnorm"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::vector<StateRef> state() override;

private:
    BatchNormParams bn_;
    Param gamma_;
    Param beta_;
    BatchNormCache cache_;
    Tensor input_;  // infer mode only
    Mode last_mode_ = Mode::Infer;
};

class ReluLayer final : public Layer {
public:
    std::string name() const override { return "relu"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor input_;
};

class MaxPoolLayer final : public Layer {
public:
    std::string name() const override { return "maxpool2"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
};

/// Collapses [N, ...] to [N, prod(...)].
class FlattenLayer final : public Layer {
public:
    std::string name() const override { return "flatten"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Shape input_shape_;
};

class DropoutLayer final : public Layer {
public:
    DropoutLayer(double rate, std::uint64_t seed);

    std::string name() const override { return "dropout"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

    void set_enabled(bool enabled) { enabled_ = enabled; }

private:
    double rate_;
    Rng rng_;
    bool enabled_ = true;
    std::vector<double> scale_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in, std::size_t out, bool with_bias, Rng& rng);

    std::string name() const override { return "dense"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Param*> params() override;
    std::vector<StateRef> state() override;

private:
    Param weights_;
    Param bias_;
    bool with_bias_;
    Tensor input_;
};

/// Ordered layer stack ending in logits; softmax and cross-entropy are
/// applied by the loss, not by a layer.
class Network {
public:
    /// Builds the stack for `spec` with Glorot-uniform weights drawn from `seed`.
    Network(const ModelSpec& spec, std::uint64_t seed);
    /// Empty stack for hand-assembled networks.
    explicit Network(ModelSpec spec);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const ModelSpec& spec() const { return spec_; }
    std::size_t num_classes() const { return spec_.num_classes; }

    void add_layer(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    /// x has shape [N, input_shape...]; returns logits [N, K].
    Tensor forward(const Tensor& x, Mode mode);
    /// Backpropagates dLoss/dlogits through every layer.
    void backward(const Tensor& grad_logits);

    /// Mean cross-entropy over the batch; fills parameter gradients.
    double loss_and_gradients(const Tensor& x, const std::vector<int>& labels, Mode mode);
    /// Mean cross-entropy without touching gradients.
    double loss(const Tensor& x, const std::vector<int>& labels, Mode mode);
    /// Same loss before rounding to double; used by gradient_check.
    long double loss_extended(const Tensor& x, const std::vector<int>& labels, Mode mode);

    /// Softmax probabilities in infer mode, [N, K].
    Tensor predict_proba(const Tensor& x);

    std::vector<Param*> params();
    std::vector<StateRef> state();
    void zero_grad();
    void set_dropout_enabled(bool enabled);

private:
    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Prepends the batch dimension to the per-sample input shape.
Shape batch_shape(const ModelSpec& spec, std::size_t n);

}  // namespace ial::nn
