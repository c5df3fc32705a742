#include "ial/nn/network.hpp"

#include <cmath>

#include "ial/error.hpp"

namespace ial::nn {

namespace {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.values) v = rng.uniform(-limit, limit);
    return t;
}

}  // namespace

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::Cnn: return "cnn";
        case ModelVariant::Fc: return "fc";
        case ModelVariant::Linear: return "linear";
    }
    return "unknown";
}

ModelVariant model_variant_from_string(const std::string& s) {
    if (s == "cnn") return ModelVariant::Cnn;
    if (s == "fc") return ModelVariant::Fc;
    if (s == "linear") return ModelVariant::Linear;
    throw Error(ErrorCode::InvalidConfig, "unknown model variant '" + s + "'");
}

ModelSpec ModelSpec::cnn(std::size_t num_classes) {
    ModelSpec s;
    s.variant = ModelVariant::Cnn;
    s.input_shape = {50, 8, 1};
    s.num_classes = num_classes;
    return s;
}

ModelSpec ModelSpec::fc(std::size_t num_classes) {
    ModelSpec s;
    s.variant = ModelVariant::Fc;
    s.input_shape = {16};
    s.num_classes = num_classes;
    return s;
}

ModelSpec ModelSpec::linear(std::size_t input_dim, std::size_t num_classes) {
    ModelSpec s;
    s.variant = ModelVariant::Linear;
    s.input_shape = {input_dim};
    s.num_classes = num_classes;
    s.dropout_rate = 0.0;
    return s;
}

Shape batch_shape(const ModelSpec& spec, std::size_t n) {
    Shape s{n};
    s.insert(s.end(), spec.input_shape.begin(), spec.input_shape.end());
    return s;
}

// ---------------------------------------------------------------- layers

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, bool with_bias,
                         Rng& rng)
    : kernels_("kernels", glorot_uniform({out_channels, kernel, kernel, in_channels}, kernel * kernel * in_channels,
                                         kernel * kernel * out_channels, rng)),
      bias_("bias", with_bias ? Tensor({out_channels}) : Tensor()),
      with_bias_(with_bias) {}

Tensor Conv2dLayer::forward(const Tensor& x, Mode) {
    input_ = x;
    return conv2d(x, kernels_.value, bias_.value);
}

Tensor Conv2dLayer::backward(const Tensor& grad_out) {
    auto g = conv2d_backward(input_, kernels_.value, grad_out, with_bias_);
    for (std::size_t i = 0; i < g.kernels.size(); ++i) kernels_.grad[i] += g.kernels[i];
    if (with_bias_) {
        for (std::size_t i = 0; i < g.bias.size(); ++i) bias_.grad[i] += g.bias[i];
    }
    return std::move(g.input);
}

std::vector<Param*> Conv2dLayer::params() {
    if (with_bias_) return {&kernels_, &bias_};
    return {&kernels_};
}

std::vector<StateRef> Conv2dLayer::state() {
    std::vector<StateRef> s{{"kernels", &kernels_.value}};
    if (with_bias_) s.push_back({"bias", &bias_.value});
    return s;
}

BatchNormLayer::BatchNormLayer(std::size_t channels, double eps, double momentum)
    : bn_(channels), gamma_("gamma", Tensor({channels}, 1.0)), beta_("beta", Tensor({channels}, 0.0)) {
    bn_.eps = eps;
    bn_.momentum = momentum;
}

Tensor BatchNormLayer::forward(const Tensor& x, Mode mode) {
    // gamma/beta live in Params so the optimizer sees them.
    bn_.gamma = gamma_.value;
    bn_.beta = beta_.value;
    last_mode_ = mode;
    if (mode == Mode::Infer) input_ = x;
    return batchnorm(x, bn_, mode, mode == Mode::Train ? &cache_ : nullptr);
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) {
    if (last_mode_ != Mode::Train) {
        // Infer mode is a per-channel affine map.
        Tensor g(grad_out.shape);
        const std::size_t c = gamma_.value.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t ch = i % c;
            const double inv_std = 1.0 / std::sqrt(bn_.running_var[ch] + bn_.eps);
            g[i] = grad_out[i] * gamma_.value[ch] * inv_std;
            gamma_.grad[ch] += grad_out[i] * (input_[i] - bn_.running_mean[ch]) * inv_std;
            beta_.grad[ch] += grad_out[i];
        }
        return g;
    }
    auto g = batchnorm_backward(cache_, bn_, grad_out);
    for (std::size_t i = 0; i < g.gamma.size(); ++i) {
        gamma_.grad[i] += g.gamma[i];
        beta_.grad[i] += g.beta[i];
    }
    return std::move(g.input);
}

std::vector<Param*> BatchNormLayer::params() { return {&gamma_, &beta_}; }

std::vector<StateRef> BatchNormLayer::state() {
    return {{"gamma", &gamma_.value},
            {"beta", &beta_.value},
            {"running_mean", &bn_.running_mean},
            {"running_var", &bn_.running_var}};
}

Tensor ReluLayer::forward(const Tensor& x, Mode) {
    input_ = x;
    return relu(x);
}

Tensor ReluLayer::backward(const Tensor& grad_out) { return relu_backward(input_, grad_out); }

Tensor MaxPoolLayer::forward(const Tensor& x, Mode) {
    input_shape_ = x.shape;
    auto r = maxpool2(x);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) { return maxpool2_backward(input_shape_, argmax_, grad_out); }

Tensor FlattenLayer::forward(const Tensor& x, Mode) {
    input_shape_ = x.shape;
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor FlattenLayer::backward(const Tensor& grad_out) { return grad_out.reshaped(input_shape_); }

DropoutLayer::DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout rate " + std::to_string(rate));
}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode) {
    auto r = dropout(x, enabled_ ? rate_ : 0.0, mode, rng_);
    scale_ = std::move(r.scale);
    return std::move(r.output);
}

Tensor DropoutLayer::backward(const Tensor& grad_out) { return dropout_backward(scale_, grad_out); }

DenseLayer::DenseLayer(std::size_t in, std::size_t out, bool with_bias, Rng& rng)
    : weights_("weights", glorot_uniform({out, in}, in, out, rng)),
      bias_("bias", with_bias ? Tensor({out}) : Tensor()),
      with_bias_(with_bias) {}

Tensor DenseLayer::forward(const Tensor& x, Mode) {
    input_ = x;
    return dense(x, weights_.value, bias_.value);
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
    auto g = dense_backward(input_, weights_.value, grad_out, with_bias_);
    for (std::size_t i = 0; i < g.weights.size(); ++i) weights_.grad[i] += g.weights[i];
    if (with_bias_) {
        for (std::size_t i = 0; i < g.bias.size(); ++i) bias_.grad[i] += g.bias[i];
    }
    return std::move(g.input);
}

std::vector<Param*> DenseLayer::params() {
    if (with_bias_) return {&weights_, &bias_};
    return {&weights_};
}

std::vector<StateRef> DenseLayer::state() {
    std::vector<StateRef> s{{"weights", &weights_.value}};
    if (with_bias_) s.push_back({"bias", &bias_.value});
    return s;
}

// ---------------------------------------------------------------- network

Network::Network(ModelSpec spec) : spec_(std::move(spec)) {}

Network::Network(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
    if (spec.num_classes < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 classes");
    Rng rng(seed);
    const std::uint64_t dropout_seed = mix_seed(seed, 0xd70);
    // Layers followed by batchnorm carry no bias; the batchnorm shift replaces it.
    switch (spec.variant) {
        case ModelVariant::Cnn: {
            if (spec.input_shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "cnn input must be HxWxC");
            std::size_t h = spec.input_shape[0], w = spec.input_shape[1], c = spec.input_shape[2];
            for (std::size_t f : spec.conv_filters) {
                add_layer(std::make_unique<Conv2dLayer>(c, f, spec.kernel_size, false, rng));
                add_layer(std::make_unique<BatchNormLayer>(f, spec.bn_eps, spec.bn_momentum));
                add_layer(std::make_unique<ReluLayer>());
                add_layer(std::make_unique<MaxPoolLayer>());
                if (h < 2 || w < 2) throw Error(ErrorCode::InputTooSmall, "input too small for conv stack");
                h /= 2;
                w /= 2;
                c = f;
            }
            add_layer(std::make_unique<FlattenLayer>());
            add_layer(std::make_unique<DropoutLayer>(spec.dropout_rate, dropout_seed));
            add_layer(std::make_unique<DenseLayer>(h * w * c, spec.num_classes, true, rng));
            break;
        }
        case ModelVariant::Fc: {
            std::size_t width = shape_size(spec.input_shape);
            for (std::size_t i = 0; i < spec.hidden_layers; ++i) {
                add_layer(std::make_unique<DenseLayer>(width, spec.hidden_units, false, rng));
                add_layer(std::make_unique<BatchNormLayer>(spec.hidden_units, spec.bn_eps, spec.bn_momentum));
                add_layer(std::make_unique<ReluLayer>());
                width = spec.hidden_units;
            }
            add_layer(std::make_unique<DropoutLayer>(spec.dropout_rate, dropout_seed));
            add_layer(std::make_unique<DenseLayer>(width, spec.num_classes, true, rng));
            break;
        }
        case ModelVariant::Linear:
            add_layer(std::make_unique<DenseLayer>(shape_size(spec.input_shape), spec.num_classes, true, rng));
            break;
    }
}

Network::Network(const Network& other) : spec_(other.spec_) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Tensor Network::forward(const Tensor& x, Mode mode) {
    if (x.rank() != spec_.input_shape.size() + 1 ||
        !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), x.shape.begin() + 1)) {
        throw Error(ErrorCode::ShapeMismatch, "network input " + shape_string(x.shape) + " vs per-sample shape " +
                                                  shape_string(spec_.input_shape));
    }
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, mode);
    return h;
}

void Network::backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

double Network::loss_and_gradients(const Tensor& x, const std::vector<int>& labels, Mode mode) {
    const Tensor logits = forward(x, mode);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) throw Error(ErrorCode::ShapeMismatch, "label count != batch size");
    Tensor grad({n, k});
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto label = static_cast<std::size_t>(labels[r]);
        if (labels[r] < 0 || label >= k) throw Error(ErrorCode::LabelOutOfRange, std::to_string(labels[r]));
        const auto p = softmax(std::span<const double>(logits.values).subspan(r * k, k));
        total += cross_entropy(p, label);
        const auto g = softmax_cross_entropy_grad(p, label);
        for (std::size_t c = 0; c < k; ++c) grad[r * k + c] = g[c] * inv_n;
    }
    backward(grad);
    return total * inv_n;
}

long double Network::loss_extended(const Tensor& x, const std::vector<int>& labels, Mode mode) {
    const Tensor logits = forward(x, mode);
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    long double total = 0.0L;
    for (std::size_t r = 0; r < n; ++r) {
        const auto label = static_cast<std::size_t>(labels[r]);
        if (labels[r] < 0 || label >= k) throw Error(ErrorCode::LabelOutOfRange, std::to_string(labels[r]));
        total += cross_entropy_from_logits(std::span<const double>(logits.values).subspan(r * k, k), label);
    }
    return total / static_cast<long double>(n);
}

double Network::loss(const Tensor& x, const std::vector<int>& labels, Mode mode) {
    return static_cast<double>(loss_extended(x, labels, mode));
}

Tensor Network::predict_proba(const Tensor& x) { return softmax_rows(forward(x, Mode::Infer)); }

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
        for (Param* p : l->params()) out.push_back(p);
    }
    return out;
}

std::vector<StateRef> Network::state() {
    std::vector<StateRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto& s : layers_[i]->state()) {
            out.push_back({std::to_string(i) + "." + layers_[i]->name() + "." + s.name, s.tensor});
        }
    }
    return out;
}

void Network::zero_grad() {
    for (Param* p : params()) p->grad.fill(0.0);
}

void Network::set_dropout_enabled(bool enabled) {
    for (auto& l : layers_) {
        if (auto* d = dynamic_cast<DropoutLayer*>(l.get())) d->set_enabled(enabled);
    }
}

}  // namespace ial::nn
