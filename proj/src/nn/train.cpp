#include "ial/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ial/error.hpp"

namespace ial::nn {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0,1)");
    if (batch_size < 2) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 2");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout_rate not in [0,1)");
    if (!(bn_eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "bn_eps must be positive");
}

void LabeledData::add(std::span<const double> sample, int label) {
    if (sample.size() != sample_size()) {
        throw Error(ErrorCode::ShapeMismatch, "sample of " + std::to_string(sample.size()) + " values for shape " +
                                                  shape_string(sample_shape));
    }
    values.insert(values.end(), sample.begin(), sample.end());
    labels.push_back(label);
}

Tensor LabeledData::batch(std::span<const std::size_t> indices) const {
    Shape s{indices.size()};
    s.insert(s.end(), sample_shape.begin(), sample_shape.end());
    Tensor t(std::move(s));
    const std::size_t m = sample_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(indices[i] * m), m,
                    t.values.begin() + static_cast<std::ptrdiff_t>(i * m));
    }
    return t;
}

std::vector<int> LabeledData::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
    return out;
}

std::vector<double> train_network(Network& net, const LabeledData& data, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "no training samples");
    if (data.sample_shape != net.spec().input_shape) {
        throw Error(ErrorCode::ShapeMismatch, "data samples " + shape_string(data.sample_shape) + " vs model input " +
                                                  shape_string(net.spec().input_shape));
    }
    for (int y : data.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= net.num_classes()) {
            throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
        }
    }
    if (data.size() < 2) throw Error(ErrorCode::BatchTooSmall, "need at least 2 samples to train");

    Rng shuffle_rng(mix_seed(cfg.seed, 0x5f));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto params = net.params();
    for (Param* p : params) p->velocity.fill(0.0);

    std::vector<double> curve;
    curve.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double total = 0.0;
        std::size_t begin = 0;
        while (begin < order.size()) {
            std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            if (order.size() - end == 1) ++end;
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            net.zero_grad();
            const double batch_loss = net.loss_and_gradients(data.batch(idx), data.batch_labels(idx), Mode::Train);
            sgd_step(params, cfg.learning_rate, cfg.momentum);
            total += batch_loss * static_cast<double>(idx.size());
            begin = end;
        }
        const double mean = total / static_cast<double>(order.size());
        curve.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return curve;
}

TrainResult train(const ModelSpec& spec, const LabeledData& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    ModelSpec s = spec;
    s.dropout_rate = cfg.dropout_rate;
    s.bn_eps = cfg.bn_eps;
    if (s.variant == ModelVariant::Linear) s.dropout_rate = 0.0;
    TrainResult r{Network(s, cfg.seed), {}};
    r.epoch_loss = train_network(r.network, data, cfg, on_epoch);
    return r;
}

double accuracy(Network& net, const LabeledData& data) {
    if (data.size() == 0) return 0.0;
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Tensor p = net.predict_proba(data.batch(idx));
    const std::size_t k = p.dim(1);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto row = p.values.begin() + static_cast<std::ptrdiff_t>(r * k);
        const auto best = static_cast<int>(std::max_element(row, row + static_cast<std::ptrdiff_t>(k)) - row);
        if (best == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

GradCheckResult gradient_check(const Network& net, const Tensor& x, const std::vector<int>& labels, Mode mode,
                               const GradCheckOptions& opts) {
    Network work(net);
    work.set_dropout_enabled(false);
    work.zero_grad();
    work.loss_and_gradients(x, labels, mode);

    GradCheckResult result;
    Rng rng(opts.seed);
    for (Param* p : work.params()) {
        std::vector<std::size_t> idx(p->value.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (idx.size() > opts.max_per_tensor) {
            rng.shuffle(idx.begin(), idx.end());
            idx.resize(opts.max_per_tensor);
            std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) {
            const double saved = p->value[i];
            const double analytic = p->grad[i];
            auto rel_error = [&](double numeric) {
                const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.floor});
                return std::abs(numeric - analytic) / denom;
            };
            auto probe = [&](double h) {
                p->value[i] = saved + h;
                const long double up = work.loss_extended(x, labels, mode);
                p->value[i] = saved - h;
                const long double down = work.loss_extended(x, labels, mode);
                p->value[i] = saved;
                return std::pair{up, down};
            };
            auto central = [](long double up, long double down, double h) {
                return static_cast<double>((up - down) / (2.0L * h));
            };

            const auto [up, down] = probe(opts.step);
            double rel = rel_error(central(up, down, opts.step));
            if (rel >= opts.kink_threshold) {
                // A ReLU or max-pool switch inside [-h, h] shows up as one-sided
                // differences that disagree; only then re-probe with smaller steps.
                const long double centre = work.loss_extended(x, labels, mode);
                const double fwd = static_cast<double>((up - centre) / opts.step);
                const double bwd = static_cast<double>((centre - down) / opts.step);
                const double spread = std::abs(fwd - bwd) / std::max({std::abs(fwd), std::abs(bwd), opts.floor});
                if (spread >= opts.kink_threshold) {
                    ++result.kinks;
                    for (double h = opts.step / 10.0; h >= opts.step / 100.0 && rel >= opts.kink_threshold; h /= 10.0) {
                        const auto [u, d] = probe(h);
                        rel = std::min(rel, rel_error(central(u, d, h)));
                    }
                }
            }
            ++result.checked;
            if (rel > result.max_rel_error || !std::isfinite(rel)) {
                result.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
                result.worst_param = std::string(p->name) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return result;
}

}  // namespace ial::nn
