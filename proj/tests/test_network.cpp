#include <doctest.h>

#include <cmath>

#include "ial/nn/checkpoint.hpp"
#include "ial/nn/network.hpp"
#include "ial/nn/train.hpp"
#include "ial/parallel.hpp"
#include "test_util.hpp"

using namespace ial;
using namespace ial::nn;

namespace {

Tensor random_batch(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x(batch_shape(spec, n));
    for (auto& v : x.values) v = rng.uniform();
    return x;
}

/// Two Gaussian blobs in 16 dimensions, far apart.
LabeledData blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledData d;
    d.sample_shape = {16};
    std::vector<double> s(16);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        for (auto& v : s) v = (y ? 0.8 : 0.2) + rng.normal(0, 0.05);
        d.add(s, y);
    }
    return d;
}

/// Identity forward whose backward returns twice the true gradient.
class BrokenScale final : public Layer {
public:
    std::string name() const override { return "broken"; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BrokenScale>(*this); }
    Tensor forward(const Tensor& x, Mode) override { return x; }
    Tensor backward(const Tensor& g) override {
        Tensor out = g;
        for (auto& v : out.values) v *= 2.0;
        return out;
    }
};

}  // namespace

TEST_CASE("architectures produce logits of the right shape") {
    for (std::size_t k : {2u, 5u}) {
        Network cnn(ModelSpec::cnn(k), 1);
        CHECK(cnn.forward(random_batch(cnn.spec(), 3, 1), Mode::Infer).shape == Shape{3, k});
        Network fc(ModelSpec::fc(k), 1);
        CHECK(fc.forward(random_batch(fc.spec(), 3, 1), Mode::Infer).shape == Shape{3, k});
    }
    Network cnn(ModelSpec::cnn(2), 1);
    CHECK_ERROR_CODE(cnn.forward(Tensor({2, 16}), Mode::Infer), ErrorCode::ShapeMismatch);
    CHECK_ERROR_CODE(cnn.forward(random_batch(cnn.spec(), 1, 2), Mode::Train), ErrorCode::BatchTooSmall);
}

TEST_CASE("predict_proba rows sum to one") {
    Network fc(ModelSpec::fc(5), 3);
    const auto p = fc.predict_proba(random_batch(fc.spec(), 7, 4));
    for (std::size_t r = 0; r < 7; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) s += p[r * 5 + c];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("same seed gives identical weights, different seed does not") {
    Network a(ModelSpec::cnn(2), 5), b(ModelSpec::cnn(2), 5), c(ModelSpec::cnn(2), 6);
    const auto x = random_batch(a.spec(), 2, 9);
    CHECK(a.forward(x, Mode::Infer) == b.forward(x, Mode::Infer));
    CHECK(a.forward(x, Mode::Infer) != c.forward(x, Mode::Infer));
}

TEST_CASE("gradient check passes for every architecture") {
    SUBCASE("linear") {
        Network net(ModelSpec::linear(16, 5), 11);
        const auto r = gradient_check(net, random_batch(net.spec(), 4, 1), {0, 1, 2, 4});
        CHECK(r.max_rel_error < 1e-8);
        CHECK(r.checked > 0);
    }
    SUBCASE("fc train mode") {
        Network net(ModelSpec::fc(5), 12);
        const auto r = gradient_check(net, random_batch(net.spec(), 4, 2), {0, 1, 3, 4});
        CHECK_MESSAGE(r.passed(1e-4), r.worst_param << " " << r.max_rel_error);
    }
    SUBCASE("fc infer mode") {
        Network net(ModelSpec::fc(2), 13);
        const auto r = gradient_check(net, random_batch(net.spec(), 3, 3), {0, 1, 1}, Mode::Infer);
        CHECK_MESSAGE(r.passed(1e-4), r.worst_param << " " << r.max_rel_error);
    }
    SUBCASE("cnn train mode") {
        Network net(ModelSpec::cnn(2), 14);
        GradCheckOptions opts;
        opts.max_per_tensor = 40;
        const auto r = gradient_check(net, random_batch(net.spec(), 3, 4), {0, 1, 1}, Mode::Train, opts);
        CHECK_MESSAGE(r.passed(1e-4), r.worst_param << " " << r.max_rel_error);
    }
}

TEST_CASE("gradient check catches a wrong backward") {
    ModelSpec spec = ModelSpec::linear(16, 2);
    Network net(spec);
    Rng rng(1);
    net.add_layer(std::make_unique<DenseLayer>(16, 4, true, rng));
    net.add_layer(std::make_unique<BrokenScale>());
    net.add_layer(std::make_unique<DenseLayer>(4, 2, true, rng));
    const auto r = gradient_check(net, random_batch(spec, 4, 5), {0, 1, 0, 1});
    CHECK(r.max_rel_error > 0.1);
    CHECK_FALSE(r.passed(1e-4));
}

TEST_CASE("training validation") {
    TrainConfig cfg;
    LabeledData empty;
    empty.sample_shape = {16};
    CHECK_ERROR_CODE(train(ModelSpec::fc(2), empty, cfg), ErrorCode::EmptyDataset);

    auto d = blobs(10, 1);
    d.labels[3] = 2;
    CHECK_ERROR_CODE(train(ModelSpec::fc(2), d, cfg), ErrorCode::LabelOutOfRange);
    d.labels[3] = -1;
    CHECK_ERROR_CODE(train(ModelSpec::fc(2), d, cfg), ErrorCode::LabelOutOfRange);

    cfg.dropout_rate = 1.0;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidRate);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    const auto d = blobs(20, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    Network before(ModelSpec::linear(16, 2), cfg.seed);
    auto result = train(ModelSpec::linear(16, 2), d, cfg);
    const auto pa = before.params();
    const auto pb = result.network.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
    for (double l : result.epoch_loss) CHECK(std::abs(l - result.epoch_loss[0]) <= 1e-12);
}

TEST_CASE("fc learns a separable problem") {
    const auto d = blobs(64, 3);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.05;
    cfg.dropout_rate = 0.0;
    auto r = train(ModelSpec::fc(2), d, cfg);
    CHECK(accuracy(r.network, d) == 1.0);
    CHECK(r.epoch_loss.size() == 15);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());

    auto again = train(ModelSpec::fc(2), d, cfg);
    CHECK(again.epoch_loss == r.epoch_loss);
}

TEST_CASE("trailing single-sample batch is folded in") {
    const auto d = blobs(9, 4);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    CHECK_NOTHROW(train(ModelSpec::fc(2), d, cfg));
}

TEST_CASE("results do not depend on thread count") {
    const auto d = blobs(24, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    LabeledData img;
    img.sample_shape = {50, 8, 1};
    Rng rng(6);
    std::vector<double> s(400);
    for (int i = 0; i < 12; ++i) {
        for (auto& v : s) v = rng.uniform();
        img.add(s, i % 2);
    }
    set_thread_count(1);
    const auto a = train(ModelSpec::fc(2), d, cfg).epoch_loss;
    const auto ca = train(ModelSpec::cnn(2), img, cfg).epoch_loss;
    set_thread_count(3);
    const auto b = train(ModelSpec::fc(2), d, cfg).epoch_loss;
    const auto cb = train(ModelSpec::cnn(2), img, cfg).epoch_loss;
    set_thread_count(1);
    CHECK(a == b);
    CHECK(ca == cb);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = scratch_dir("ckpt");
    const auto d = blobs(16, 7);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    auto r = train(ModelSpec::fc(5), d, cfg);
    save_checkpoint(dir / "m.json", r.network, "abc");
    auto loaded = load_checkpoint(dir / "m.json", r.network.spec());
    Tensor x(batch_shape(r.network.spec(), 16), d.values);
    CHECK(loaded.predict_proba(x) == r.network.predict_proba(x));

    CHECK_ERROR_CODE(load_checkpoint(dir / "m.json", ModelSpec::fc(2)), ErrorCode::CheckpointMismatch);
    CHECK_ERROR_CODE(load_checkpoint(dir / "missing.json"), ErrorCode::MissingCheckpoint);

    Network cnn(ModelSpec::cnn(2), 1);
    save_checkpoint(dir / "c.json", cnn);
    auto c2 = load_checkpoint(dir / "c.json");
    CHECK(c2.spec() == cnn.spec());
    const auto xi = random_batch(cnn.spec(), 2, 1);
    CHECK(c2.predict_proba(xi) == cnn.predict_proba(xi));
}

TEST_CASE("model variant names") {
    CHECK(model_variant_from_string("cnn") == ModelVariant::Cnn);
    CHECK(model_variant_from_string(to_string(ModelVariant::Fc)) == ModelVariant::Fc);
    CHECK_ERROR_CODE(model_variant_from_string("rnn"), ErrorCode::InvalidConfig);
}
