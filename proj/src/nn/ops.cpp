#include "ial/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ial/error.hpp"
#include "ial/parallel.hpp"

namespace ial::nn {

Tensor relu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < 0.0 ? 0.0 : x[i];
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    require_shape(grad_out, x.shape, "relu_backward");
    Tensor g(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] < 0.0 ? 0.0 : grad_out[i];
    return g;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "softmax_rows expects [N,K]");
    Tensor out(logits.shape);
    const std::size_t k = logits.dim(1);
    for (std::size_t n = 0; n < logits.dim(0); ++n) {
        const auto p = softmax(std::span<const double>(logits.values).subspan(n * k, k));
        std::copy(p.begin(), p.end(), out.values.begin() + static_cast<std::ptrdiff_t>(n * k));
    }
    return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
    return -std::log(std::max(probs[label], kProbFloor));
}

long double cross_entropy_from_logits(std::span<const double> logits, std::size_t label) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    long double sum = 0.0L;
    for (double z : logits) sum += std::exp(static_cast<long double>(z) - peak);
    const long double nll = std::log(sum) - (static_cast<long double>(logits[label]) - peak);
    return std::min(nll, -std::log(static_cast<long double>(kProbFloor)));
}

std::vector<double> softmax_cross_entropy_grad(std::span<const double> probs, std::size_t label) {
    std::vector<double> g(probs.begin(), probs.end());
    g[label] -= 1.0;
    return g;
}

// ---------------------------------------------------------------- conv2d

namespace {

struct ConvGeometry {
    std::size_t n, h, w, cin, cout, kh, kw, ph, pw;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels) {
    if (input.rank() != 4 || kernels.rank() != 4) {
        throw Error(ErrorCode::ShapeMismatch, "conv2d expects input [N,H,W,C] and kernels [Cout,kh,kw,Cin]");
    }
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                   kernels.dim(0), kernels.dim(1), kernels.dim(2), 0, 0};
    if (kernels.dim(3) != g.cin) {
        throw Error(ErrorCode::ShapeMismatch, "kernel depth " + std::to_string(kernels.dim(3)) +
                                                  " != input channels " + std::to_string(g.cin));
    }
    if (g.kh % 2 == 0 || g.kw % 2 == 0) throw Error(ErrorCode::ShapeMismatch, "same padding needs odd kernels");
    g.ph = g.kh / 2;
    g.pw = g.kw / 2;
    return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    const auto g = conv_geometry(input, kernels);
    if (!bias.values.empty()) require_shape(bias, {g.cout}, "conv2d bias");
    Tensor out({g.n, g.h, g.w, g.cout});
    // Kernels regrouped as [kh][kw][Cin][Cout] so the innermost loop runs
    // over contiguous output channels.
    std::vector<double> kt(kernels.size());
    for (std::size_t c = 0; c < g.cout; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx)
                for (std::size_t i = 0; i < g.cin; ++i)
                    kt[((ky * g.kw + kx) * g.cin + i) * g.cout + c] = kernels[((c * g.kh + ky) * g.kw + kx) * g.cin + i];
    const double* in = input.values.data();
    const double* k = kt.data();
    double* o = out.values.data();

    parallel_for(g.n, [&](std::size_t n) {
        for (std::size_t y = 0; y < g.h; ++y) {
            for (std::size_t x = 0; x < g.w; ++x) {
                double* dst = o + ((n * g.h + y) * g.w + x) * g.cout;
                for (std::size_t c = 0; c < g.cout; ++c) dst[c] = bias.values.empty() ? 0.0 : bias[c];
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const auto yy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.ph);
                    if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const auto xx = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pw);
                        if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        const double* src = in + ((n * g.h + static_cast<std::size_t>(yy)) * g.w +
                                                  static_cast<std::size_t>(xx)) * g.cin;
                        const double* kp = k + (ky * g.kw + kx) * g.cin * g.cout;
                        for (std::size_t i = 0; i < g.cin; ++i) {
                            const double v = src[i];
                            const double* kr = kp + i * g.cout;
                            for (std::size_t c = 0; c < g.cout; ++c) dst[c] += v * kr[c];
                        }
                    }
                }
            }
        }
    });
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, bool with_bias) {
    const auto g = conv_geometry(input, kernels);
    require_shape(grad_out, {g.n, g.h, g.w, g.cout}, "conv2d_backward grad_out");
    Conv2dGrads grads{Tensor(input.shape), Tensor(kernels.shape), with_bias ? Tensor({g.cout}) : Tensor()};
    const double* in = input.values.data();
    const double* k = kernels.values.data();
    const double* go = grad_out.values.data();

    // Input gradient: samples are independent.
    double* gin = grads.input.values.data();
    parallel_for(g.n, [&](std::size_t n) {
        for (std::size_t y = 0; y < g.h; ++y) {
            for (std::size_t x = 0; x < g.w; ++x) {
                const double* gp = go + ((n * g.h + y) * g.w + x) * g.cout;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const auto yy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.ph);
                    if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const auto xx = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pw);
                        if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        double* dst = gin + ((n * g.h + static_cast<std::size_t>(yy)) * g.w +
                                             static_cast<std::size_t>(xx)) * g.cin;
                        for (std::size_t c = 0; c < g.cout; ++c) {
                            const double gv = gp[c];
                            if (gv == 0.0) continue;
                            const double* kp = k + ((c * g.kh + ky) * g.kw + kx) * g.cin;
                            for (std::size_t i = 0; i < g.cin; ++i) dst[i] += gv * kp[i];
                        }
                    }
                }
            }
        }
    });

    // Kernel gradient accumulated as [kh][kw][Cin][Cout]. Each row is owned by
    // one task and sums samples in index order, so the result does not
    // depend on the thread count.
    const std::size_t rows = g.kh * g.kw * g.cin;
    std::vector<double> gkt(rows * g.cout, 0.0);
    parallel_for(rows, [&](std::size_t row) {
        const std::size_t i = row % g.cin;
        const std::size_t kx = (row / g.cin) % g.kw;
        const std::size_t ky = row / (g.cin * g.kw);
        double* dst = gkt.data() + row * g.cout;
        for (std::size_t n = 0; n < g.n; ++n) {
            for (std::size_t y = 0; y < g.h; ++y) {
                const auto yy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.ph);
                if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                for (std::size_t x = 0; x < g.w; ++x) {
                    const auto xx = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pw);
                    if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) continue;
                    const double v = in[((n * g.h + static_cast<std::size_t>(yy)) * g.w + static_cast<std::size_t>(xx)) *
                                            g.cin + i];
                    if (v == 0.0) continue;
                    const double* gp = go + ((n * g.h + y) * g.w + x) * g.cout;
                    for (std::size_t c = 0; c < g.cout; ++c) dst[c] += v * gp[c];
                }
            }
        }
    });
    for (std::size_t c = 0; c < g.cout; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx)
                for (std::size_t i = 0; i < g.cin; ++i)
                    grads.kernels[((c * g.kh + ky) * g.kw + kx) * g.cin + i] =
                        gkt[((ky * g.kw + kx) * g.cin + i) * g.cout + c];

    if (with_bias) {
        for (std::size_t p = 0; p < g.n * g.h * g.w; ++p) {
            for (std::size_t c = 0; c < g.cout; ++c) grads.bias[c] += go[p * g.cout + c];
        }
    }
    return grads;
}

// ---------------------------------------------------------------- max-pool

MaxPoolResult maxpool2(const Tensor& input) {
    if (input.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "maxpool2 expects [N,H,W,C]");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    if (h < 2 || w < 2) {
        throw Error(ErrorCode::InputTooSmall, "maxpool2 needs H,W >= 2, got " + shape_string(input.shape));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    MaxPoolResult r{Tensor({n, oh, ow, c}), std::vector<std::size_t>(n * oh * ow * c)};
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t cand[4] = {
                        ((b * h + 2 * i) * w + 2 * j) * c + ch,
                        ((b * h + 2 * i) * w + 2 * j + 1) * c + ch,
                        ((b * h + 2 * i + 1) * w + 2 * j) * c + ch,
                        ((b * h + 2 * i + 1) * w + 2 * j + 1) * c + ch,
                    };
                    std::size_t best = cand[0];
                    for (int q = 1; q < 4; ++q) {
                        if (input[cand[q]] > input[best]) best = cand[q];
                    }
                    const std::size_t o = ((b * oh + i) * ow + j) * c + ch;
                    r.output[o] = input[best];
                    r.argmax[o] = best;
                }
            }
        }
    }
    return r;
}

Tensor maxpool2_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax, const Tensor& grad_out) {
    if (argmax.size() != grad_out.size()) throw Error(ErrorCode::ShapeMismatch, "maxpool2_backward argmax size");
    Tensor g(input_shape);
    for (std::size_t o = 0; o < grad_out.size(); ++o) g[argmax[o]] += grad_out[o];
    return g;
}

// ---------------------------------------------------------------- batchnorm

BatchNormParams::BatchNormParams(std::size_t channels)
    : gamma({channels}, 1.0), beta({channels}, 0.0), running_mean({channels}, 0.0), running_var({channels}, 1.0) {}

Tensor batchnorm(const Tensor& x, BatchNormParams& p, Mode mode, BatchNormCache* cache) {
    const std::size_t c = p.gamma.size();
    if (x.rank() < 2 || x.shape.back() != c) {
        throw Error(ErrorCode::ShapeMismatch, "batchnorm over " + std::to_string(c) + " channels got " +
                                                  shape_string(x.shape));
    }
    const std::size_t m = x.size() / c;
    Tensor y(x.shape);

    if (mode == Mode::Infer) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double inv = 1.0 / std::sqrt(p.running_var[ch] + p.eps);
            for (std::size_t r = 0; r < m; ++r) {
                const std::size_t i = r * c + ch;
                y[i] = p.gamma[ch] * (x[i] - p.running_mean[ch]) * inv + p.beta[ch];
            }
        }
        return y;
    }

    if (x.dim(0) < 2) throw Error(ErrorCode::BatchTooSmall, "train-mode batchnorm needs batch >= 2");
    Tensor x_hat(x.shape);
    std::vector<double> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t r = 0; r < m; ++r) sum += x[r * c + ch];
        const double mean = sum / static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double d = x[r * c + ch] - mean;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(m);
        inv_std[ch] = 1.0 / std::sqrt(var + p.eps);
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t i = r * c + ch;
            x_hat[i] = (x[i] - mean) * inv_std[ch];
            y[i] = p.gamma[ch] * x_hat[i] + p.beta[ch];
        }
        p.running_mean[ch] = p.momentum * p.running_mean[ch] + (1.0 - p.momentum) * mean;
        p.running_var[ch] = p.momentum * p.running_var[ch] + (1.0 - p.momentum) * var;
    }
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p, const Tensor& grad_out) {
    require_shape(grad_out, cache.x_hat.shape, "batchnorm_backward grad_out");
    const std::size_t c = p.gamma.size();
    const std::size_t m = grad_out.size() / c;
    BatchNormGrads g{Tensor(grad_out.shape), Tensor({c}), Tensor({c})};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t i = r * c + ch;
            dgamma += grad_out[i] * cache.x_hat[i];
            dbeta += grad_out[i];
        }
        g.gamma[ch] = dgamma;
        g.beta[ch] = dbeta;
        const double md = static_cast<double>(m);
        const double scale = p.gamma[ch] * cache.inv_std[ch] / md;
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t i = r * c + ch;
            g.input[i] = scale * (md * grad_out[i] - dbeta - cache.x_hat[i] * dgamma);
        }
    }
    return g;
}

// ---------------------------------------------------------------- dense

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "dense: input " + shape_string(x.shape) + " vs weights " + shape_string(w.shape));
    }
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (!b.values.empty()) require_shape(b, {out}, "dense bias");
    Tensor y({n, out});
    parallel_for(n, [&](std::size_t r) {
        const double* xr = x.values.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = w.values.data() + o * in;
            double s = b.values.empty() ? 0.0 : b[o];
            for (std::size_t i = 0; i < in; ++i) s += wr[i] * xr[i];
            y[r * out + o] = s;
        }
    });
    return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, bool with_bias) {
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    require_shape(grad_out, {n, out}, "dense_backward grad_out");
    DenseGrads g{Tensor(x.shape), Tensor(w.shape), with_bias ? Tensor({out}) : Tensor()};
    parallel_for(n, [&](std::size_t r) {
        double* gx = g.input.values.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double gv = grad_out[r * out + o];
            if (gv == 0.0) continue;
            const double* wr = w.values.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) gx[i] += gv * wr[i];
        }
    });
    parallel_for(out, [&](std::size_t o) {
        double* gw = g.weights.values.data() + o * in;
        double bsum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double gv = grad_out[r * out + o];
            bsum += gv;
            if (gv == 0.0) continue;
            const double* xr = x.values.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) gw[i] += gv * xr[i];
        }
        if (with_bias) g.bias[o] = bsum;
    });
    return g;
}

// ---------------------------------------------------------------- dropout

DropoutResult dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw Error(ErrorCode::InvalidRate, "dropout rate " + std::to_string(rate) + " not in [0,1)");
    }
    if (mode == Mode::Infer || rate == 0.0) return {x, {}};
    DropoutResult r{Tensor(x.shape), std::vector<double>(x.size())};
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.scale[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        r.output[i] = x[i] * r.scale[i];
    }
    return r;
}

Tensor dropout_backward(const std::vector<double>& scale, const Tensor& grad_out) {
    if (scale.empty()) return grad_out;
    Tensor g(grad_out.shape);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * scale[i];
    return g;
}

// ---------------------------------------------------------------- optimizer

void sgd_step(std::span<Param* const> params, double learning_rate, double momentum) {
    for (Param* p : params) {
        require_shape(p->grad, p->value.shape, p->name);
        if (p->velocity.shape != p->value.shape) p->velocity = Tensor(p->value.shape);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            p->velocity[i] = momentum * p->velocity[i] - learning_rate * p->grad[i];
            p->value[i] += p->velocity[i];
        }
    }
}

}  // namespace ial::nn
