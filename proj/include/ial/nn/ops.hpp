#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ial/nn/tensor.hpp"
#include "ial/rng.hpp"

namespace ial::nn {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------- ReLU

Tensor relu(const Tensor& x);
/// Passes grad_out where x >= 0, zero where x < 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// ---------------------------------------------------------------- softmax / loss

/// Max-subtracted softmax over a single logit vector.
std::vector<double> softmax(std::span<const double> logits);
/// Row-wise softmax of an [N, K] tensor.
Tensor softmax_rows(const Tensor& logits);

inline constexpr double kProbFloor = 1e-12;

/// -ln(max(p[label], 1e-12)).
double cross_entropy(std::span<const double> probs, std::size_t label);
/// cross_entropy(softmax(logits), label) via log-sum-exp, same floor, in
/// extended precision so finite differences of the loss keep more digits.
long double cross_entropy_from_logits(std::span<const double> logits, std::size_t label);
/// Gradient of cross_entropy(softmax(z)) w.r.t. z: p - onehot(label).
std::vector<double> softmax_cross_entropy_grad(std::span<const double> probs, std::size_t label);

// ---------------------------------------------------------------- conv2d

/// input [N,H,W,Cin], kernels [Cout,kh,kw,Cin], bias [Cout] or empty.
/// Cross-correlation, stride 1, zero padding that preserves HxW (odd kernels).
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, bool with_bias);

// ---------------------------------------------------------------- max-pool

struct MaxPoolResult {
    Tensor output;
    /// Flat input index chosen for each output element.
    std::vector<std::size_t> argmax;
};

/// Non-overlapping 2x2 max over [N,H,W,C]; trailing odd row/col dropped.
/// Ties go to the first cell in row-major order. Throws InputTooSmall.
MaxPoolResult maxpool2(const Tensor& input);
Tensor maxpool2_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax, const Tensor& grad_out);

// ---------------------------------------------------------------- batchnorm

/// Per-channel parameters and running statistics. Channels are the last
/// tensor axis; statistics pool over every other axis.
struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double eps = 1e-5;
    double momentum = 0.9;

    explicit BatchNormParams(std::size_t channels = 0);
};

struct BatchNormCache {
    Tensor x_hat;
    std::vector<double> inv_std;
};

/// Train mode needs at least 2 rows per channel (BatchTooSmall) and updates
/// running stats as running = momentum * running + (1 - momentum) * batch.
Tensor batchnorm(const Tensor& x, BatchNormParams& p, Mode mode, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

/// Full batch-coupled gradient of the train-mode forward.
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p, const Tensor& grad_out);

// ---------------------------------------------------------------- dense

/// x [N, in], W [out, in], b [out] or empty -> [N, out].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, bool with_bias);

// ---------------------------------------------------------------- dropout

struct DropoutResult {
    Tensor output;
    /// 0 or 1/(1-rate) per element; empty in infer mode.
    std::vector<double> scale;
};

/// Inverted dropout. Throws InvalidRate unless rate in [0, 1).
DropoutResult dropout(const Tensor& x, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const std::vector<double>& scale, const Tensor& grad_out);

// ---------------------------------------------------------------- optimizer

struct Param {
    const char* name = "";
    Tensor value;
    Tensor grad;
    Tensor velocity;

    Param() = default;
    Param(const char* n, Tensor v) : name(n), value(std::move(v)), grad(value.shape), velocity(value.shape) {}
};

/// Momentum SGD: v <- momentum * v - lr * grad; value <- value + v.
void sgd_step(std::span<Param* const> params, double learning_rate, double momentum);

}  // namespace ial::nn
