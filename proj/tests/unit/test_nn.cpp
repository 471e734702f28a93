#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/nn.hpp"
#include "pcgcls/random.hpp"

using namespace pcg;
using namespace pcg::nn;

namespace {

Layer<double> lone_layer(LayerSpec spec, Shape in, Shape out) {
    Layer<double> l;
    l.spec = spec;
    l.input_shape = std::move(in);
    l.output_shape = std::move(out);
    return l;
}

void run_gradcheck(Shape input, const std::vector<LayerSpec>& specs, std::uint64_t seed, std::size_t batch = 4,
                   ClassWeights w = {1.0, 2.5}) {
    Rng rng(seed);
    Network<double> net(input, specs, seed);
    gradcheck::jitter(net, rng);
    Shape batch_shape = input;
    batch_shape.insert(batch_shape.begin(), batch);
    gradcheck::Problem p{&net, gradcheck::random_inputs(rng, batch_shape), gradcheck::random_labels(rng, batch), w};
    const auto r = gradcheck::check(p, rng, 0, 40);
    CHECK(r.probes > 40);
    CHECK_MESSAGE(r.failures == 0, "worst relative error " << r.worst);
}

const Dataset<double>* const kNoValidation = nullptr;

std::vector<LayerSpec> head() { return {LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()}; }

std::vector<LayerSpec> with_head(std::vector<LayerSpec> body) {
    for (const auto& s : head()) body.push_back(s);
    return body;
}

// Two Gaussian blobs in 4-d.
Dataset<double> blobs(Rng& rng, std::size_t n) {
    Dataset<double> d;
    d.inputs = Tensor<double>({n, 4});
    for (std::size_t i = 0; i < n; ++i) {
        const Label l = i % 2 ? Label::Abnormal : Label::Normal;
        d.labels.push_back(l);
        for (std::size_t k = 0; k < 4; ++k) d.inputs[i * 4 + k] = standard_normal(rng) * 0.5 + (l == Label::Abnormal ? 1.0 : -1.0);
    }
    return d;
}

std::vector<double> flat_params(const Network<double>& net) {
    std::vector<double> out;
    for (const auto& l : net.layers()) {
        for (const auto& p : l.params) out.insert(out.end(), p.value.values.begin(), p.value.values.end());
    }
    return out;
}

}  // namespace

// --- shapes --------------------------------------------------------------------

TEST_CASE("conv: SAME padding keeps the spatial size") {
    Network<float> n1({1000, 1}, {LayerSpec::conv1d(6, 8)}, 1);
    CHECK(n1.output_shape() == Shape{1000, 8});
    Network<float> n2({96, 12, 1}, {LayerSpec::conv2d(4, 16)}, 1);
    CHECK(n2.output_shape() == Shape{96, 12, 16});
    Network<float> n3({9, 1}, {LayerSpec::conv1d(3, 2, 2)}, 1);
    CHECK(n3.output_shape() == Shape{5, 2});
}

TEST_CASE("conv: unit kernel with zero bias is the identity") {
    Network<double> net({7, 1}, {LayerSpec::conv1d(1, 1)}, 3);
    net.layers()[0].params[0].value.values = {1.0};
    net.layers()[0].params[1].value.values = {0.0};
    Tensor<double> x({2, 7, 1});
    std::iota(x.values.begin(), x.values.end(), -3.0);
    CHECK(net.forward(x, Mode::Infer).values == x.values);
}

TEST_CASE("conv: hand-computed 1-d SAME output with an even kernel") {
    // kernel 2 pads one zero after the signal
    Network<double> net({3, 1}, {LayerSpec::conv1d(2, 1)}, 3);
    net.layers()[0].params[0].value.values = {1.0, 10.0};
    net.layers()[0].params[1].value.values = {0.5};
    const Tensor<double> x({1, 3, 1}, {1.0, 2.0, 3.0});
    const auto y = net.forward(x, Mode::Infer);
    CHECK(y.values == std::vector<double>{21.5, 32.5, 3.5});
}

TEST_CASE("maxpool: shapes, hand values, constants") {
    Network<double> pool2d({24, 3, 16}, {LayerSpec::maxpool2d()}, 1);
    CHECK(pool2d.output_shape() == Shape{12, 1, 16});
    Network<double> pool1d({4, 1}, {LayerSpec::maxpool1d()}, 1);
    CHECK(pool1d.forward(Tensor<double>({1, 4, 1}, {1, 5, 2, 4}), Mode::Infer).values == std::vector<double>{5, 4});
    Tensor<double> c({2, 24, 3, 16}, 0.7);
    for (double v : pool2d.forward(c, Mode::Infer).values) CHECK(v == 0.7);
    auto layer = lone_layer(LayerSpec::maxpool1d(), {4, 1}, {2, 1});
    maxpool_forward(layer, Tensor<double>({1, 4, 1}, {1, 5, 2, 4}));
    CHECK(layer.argmax == std::vector<std::uint32_t>{1, 3});
}

TEST_CASE("network: wrong input shape is a shape error") {
    Network<float> net({96, 12, 1}, {LayerSpec::conv2d(4, 2), LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()}, 1);
    CHECK_THROWS_AS(net.forward(Tensor<float>({2, 96, 13, 1}), Mode::Infer), ShapeError);
    CHECK_THROWS_AS(Network<float>({10}, {LayerSpec::conv2d(3, 2)}, 1), ShapeError);
    CHECK_THROWS_AS(Network<float>({10, 1}, {LayerSpec::dropout(1.0)}, 1), ConfigError);
}

// --- batch norm -----------------------------------------------------------------

TEST_CASE("batchnorm: TRAIN output has zero mean and unit variance per channel") {
    Rng rng(1);
    Network<double> net({10, 3}, {LayerSpec::batchnorm()}, 1);
    auto x = gradcheck::random_inputs(rng, {8, 10, 3});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 5.0 + 3.0 * x[i] * static_cast<double>(i % 3 + 1);
    const auto y = net.forward(x, Mode::Train);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (std::size_t i = c; i < y.size(); i += 3) m += y[i];
        m /= 80.0;
        for (std::size_t i = c; i < y.size(); i += 3) v += (y[i] - m) * (y[i] - m);
        v /= 80.0;
        CHECK(std::abs(m) < 1e-6);
        CHECK(std::abs(v - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm: gamma 2 and beta 3 give 2 * normalised + 3") {
    Rng rng(2);
    Network<double> plain({5, 2}, {LayerSpec::batchnorm()}, 1), affine({5, 2}, {LayerSpec::batchnorm()}, 1);
    for (auto& p : affine.layers()[0].params) {
        for (auto& v : p.value.values) v = p.name == "gamma" ? 2.0 : 3.0;
    }
    const auto x = gradcheck::random_inputs(rng, {6, 5, 2});
    const auto a = plain.forward(x, Mode::Train), b = affine.forward(x, Mode::Train);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2.0 * a[i] + 3.0).epsilon(1e-12));
}

TEST_CASE("batchnorm: running statistics converge to the batch statistics") {
    Rng rng(3);
    Network<double> net({6, 2}, {LayerSpec::batchnorm()}, 1);
    const auto x = gradcheck::random_inputs(rng, {16, 6, 2});
    CHECK_THROWS_AS(net.forward(x, Mode::Infer), ValidationError);
    Tensor<double> train;
    for (int i = 0; i < 200; ++i) train = net.forward(x, Mode::Train);
    const auto infer = net.forward(x, Mode::Infer);
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(infer[i] - train[i]));
    // running variance uses the biased batch estimate, so only eps-level drift remains
    CHECK(worst < 1e-3);
}

TEST_CASE("batchnorm: TRAIN needs at least two samples") {
    Network<double> net({4, 1}, {LayerSpec::batchnorm()}, 1);
    CHECK_THROWS_AS(net.forward(Tensor<double>({1, 4, 1}, 1.0), Mode::Train), ValidationError);
}

// --- softmax / loss ----------------------------------------------------------------

TEST_CASE("softmax: hand-computed rows") {
    const auto p = softmax_rows(Tensor<double>({3, 2}, {0.0, 0.0, std::log(3.0), 0.0, 800.0, -800.0}));
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
    CHECK(p[2] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p[3] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p[4] == 1.0);
    CHECK(p[5] == 0.0);
}

TEST_CASE("softmax: random networks emit finite, normalised rows") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Network<float> net({20, 1}, with_head({LayerSpec::conv1d(3, 4), LayerSpec::relu(), LayerSpec::maxpool1d()}), rng());
        Tensor<float> x({5, 20, 1});
        for (auto& v : x.values) v = static_cast<float>(standard_normal(rng) * 100.0);
        const auto p = net.forward(x, Mode::Infer);
        REQUIRE(p.all_finite());
        for (std::size_t b = 0; b < 5; ++b) CHECK(p[2 * b] + p[2 * b + 1] == doctest::Approx(1.0f).epsilon(1e-6));
    }
}

TEST_CASE("loss: perfect prediction costs zero, hand value for weighted half") {
    const std::vector<Label> ab = {Label::Abnormal};
    CHECK(weighted_cross_entropy(Tensor<double>({1, 2}, {0.0, 1.0}), ab, {}).loss == 0.0);
    const auto r = weighted_cross_entropy(Tensor<double>({1, 2}, {0.5, 0.5}), ab, {1.0, 4.0});
    CHECK(r.loss == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(r.grad_logits[0] == doctest::Approx(2.0));
    CHECK(r.grad_logits[1] == doctest::Approx(-2.0));
}

TEST_CASE("loss: unit weights reduce to plain cross-entropy") {
    Rng rng(5);
    Tensor<double> probs({6, 2});
    std::vector<Label> labels;
    double want = 0;
    for (std::size_t b = 0; b < 6; ++b) {
        const double p = uniform(rng, 0.05, 0.95);
        probs[2 * b] = p;
        probs[2 * b + 1] = 1.0 - p;
        labels.push_back(b % 3 ? Label::Normal : Label::Abnormal);
        want -= std::log(labels.back() == Label::Normal ? p : 1.0 - p);
    }
    CHECK(weighted_cross_entropy(probs, labels, {1.0, 1.0}).loss == doctest::Approx(want / 6.0).epsilon(1e-14));
}

// --- gradients ---------------------------------------------------------------------

TEST_CASE("gradcheck: dense + softmax") {
    run_gradcheck({5}, {LayerSpec::dense(3), LayerSpec::dense(2), LayerSpec::softmax()}, 11);
}

TEST_CASE("gradcheck: conv1d with odd, even and strided kernels") {
    run_gradcheck({9, 2}, with_head({LayerSpec::conv1d(3, 3)}), 12);
    run_gradcheck({9, 2}, with_head({LayerSpec::conv1d(4, 2)}), 13);
    run_gradcheck({9, 2}, with_head({LayerSpec::conv1d(3, 2, 2)}), 14);
}

TEST_CASE("gradcheck: conv2d with odd, even and strided kernels") {
    run_gradcheck({6, 5, 2}, with_head({LayerSpec::conv2d(3, 2)}), 15);
    run_gradcheck({6, 5, 2}, with_head({LayerSpec::conv2d(4, 2)}), 16);
    run_gradcheck({7, 5, 1}, with_head({LayerSpec::conv2d(3, 2, 2)}), 17);
}

TEST_CASE("gradcheck: batch norm") {
    run_gradcheck({6, 3}, with_head({LayerSpec::conv1d(3, 3), LayerSpec::batchnorm()}), 18, 5);
    run_gradcheck({4, 3, 2}, with_head({LayerSpec::batchnorm()}), 19, 6);
}

TEST_CASE("gradcheck: relu") {
    run_gradcheck({8, 1}, with_head({LayerSpec::conv1d(3, 4), LayerSpec::relu()}), 20);
}

TEST_CASE("gradcheck: max pooling 1d and 2d") {
    run_gradcheck({8, 2}, with_head({LayerSpec::conv1d(3, 2), LayerSpec::maxpool1d()}), 21);
    run_gradcheck({6, 6, 1}, with_head({LayerSpec::conv2d(3, 2), LayerSpec::maxpool2d()}), 22);
    run_gradcheck({7, 5, 2}, with_head({LayerSpec::maxpool2d()}), 23);
}

TEST_CASE("gradcheck: dropout with a fixed mask") {
    run_gradcheck({10, 2}, with_head({LayerSpec::conv1d(3, 3), LayerSpec::dropout(0.4)}), 24);
    run_gradcheck({6}, {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dropout(0.5), LayerSpec::dense(2), LayerSpec::softmax()}, 25);
}

TEST_CASE("backward: zero learning signal gives zero gradients") {
    Rng rng(26);
    Network<double> net({6, 1}, with_head({LayerSpec::conv1d(3, 2), LayerSpec::relu()}), 26);
    net.layers()[3].params[1].value.values = {900.0, -900.0};  // dense bias drives p to exactly one-hot
    const auto x = gradcheck::random_inputs(rng, {3, 6, 1});
    const auto probs = net.forward(x, Mode::Train);
    REQUIRE(probs[0] == 1.0);
    const std::vector<Label> labels(3, Label::Normal);
    const auto loss = weighted_cross_entropy(probs, labels, {});
    CHECK(loss.loss == 0.0);
    net.backward_from_logits(loss.grad_logits);
    for (const auto& l : net.layers()) {
        for (const auto& p : l.params) {
            for (double g : p.grad.values) CHECK(g == 0.0);
        }
    }
}

TEST_CASE("backward: doubling the loss weight doubles every gradient") {
    Rng rng(27);
    Network<double> net({8, 1}, with_head({LayerSpec::conv1d(3, 2), LayerSpec::batchnorm(), LayerSpec::relu(), LayerSpec::maxpool1d()}), 27);
    gradcheck::jitter(net, rng);
    const auto x = gradcheck::random_inputs(rng, {4, 8, 1});
    const auto labels = gradcheck::random_labels(rng, 4);
    auto grads = [&](double w) {
        const auto probs = net.forward(x, Mode::Train);
        net.backward_from_logits(weighted_cross_entropy(probs, labels, {w, w}).grad_logits);
        std::vector<double> g;
        for (const auto& l : net.layers()) {
            for (const auto& p : l.params) g.insert(g.end(), p.grad.values.begin(), p.grad.values.end());
        }
        return g;
    };
    const auto g1 = grads(1.0), g2 = grads(2.0);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

// --- optimiser ---------------------------------------------------------------------

TEST_CASE("adam: first step moves each parameter by lr * g / (|g| + eps)") {
    Rng rng(28);
    Network<double> net({3}, {LayerSpec::dense(2), LayerSpec::softmax()}, 28);
    const auto before = flat_params(net);
    std::vector<double> g;
    for (auto& l : net.layers()) {
        for (auto& p : l.params) {
            for (auto& v : p.grad.values) {
                v = standard_normal(rng) * 1e-3;
                g.push_back(v);
            }
        }
    }
    AdamState<double> state;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    adam_step(net, state, cfg);
    const auto after = flat_params(net);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double want = cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon);
        CHECK(before[i] - after[i] == doctest::Approx(want).epsilon(1e-9));
        CHECK(std::abs(before[i] - after[i]) == doctest::Approx(0.01).epsilon(1e-4));
    }
}

TEST_CASE("adam: zero gradients leave parameters fixed") {
    Network<double> net({3}, {LayerSpec::dense(2), LayerSpec::softmax()}, 29);
    const auto before = flat_params(net);
    net.zero_grad();
    AdamState<double> state;
    for (int i = 0; i < 50; ++i) adam_step(net, state, {});
    CHECK(flat_params(net) == before);
}

TEST_CASE("adam: beta1 = beta2 = 0 is sign-normalised SGD at every step") {
    Rng rng(30);
    Network<double> net({3}, {LayerSpec::dense(2), LayerSpec::softmax()}, 30);
    AdamState<double> state;
    AdamConfig cfg;
    cfg.beta1 = 0.0;
    cfg.beta2 = 0.0;
    for (int step = 0; step < 5; ++step) {
        const auto before = flat_params(net);
        std::vector<double> g;
        for (auto& l : net.layers()) {
            for (auto& p : l.params) {
                for (auto& v : p.grad.values) {
                    v = standard_normal(rng);
                    g.push_back(v);
                }
            }
        }
        adam_step(net, state, cfg);
        const auto after = flat_params(net);
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(before[i] - after[i] == doctest::Approx(cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon)).epsilon(1e-9));
        }
    }
}

// --- dropout -----------------------------------------------------------------------

TEST_CASE("dropout: ratio 0 and INFER are identities") {
    Rng rng(31);
    const auto x = gradcheck::random_inputs(rng, {4, 10});
    auto zero = lone_layer(LayerSpec::dropout(0.0), {10}, {10});
    CHECK(dropout_forward(zero, x, Mode::Train, rng).values == x.values);
    auto half = lone_layer(LayerSpec::dropout(0.5), {10}, {10});
    CHECK(dropout_forward(half, x, Mode::Infer, rng).values == x.values);
}

TEST_CASE("dropout: inverted scaling keeps the expectation") {
    Rng rng(32);
    const double p = 0.4;
    auto layer = lone_layer(LayerSpec::dropout(p), {8}, {8});
    const Tensor<double> x({1, 8}, {1.0, -2.0, 0.5, 3.0, 1.5, -1.0, 2.0, 0.25});
    const int draws = 10000;
    std::vector<double> mean(8, 0.0);
    for (int d = 0; d < draws; ++d) {
        const auto y = dropout_forward(layer, x, Mode::Train, rng);
        for (std::size_t i = 0; i < 8; ++i) mean[i] += y[i] / draws;
    }
    // per element: sd of one draw is |x| sqrt(p / (1 - p))
    for (std::size_t i = 0; i < 8; ++i) {
        const double sigma = std::abs(x[i]) * std::sqrt(p / (1.0 - p)) / std::sqrt(static_cast<double>(draws));
        CHECK(std::abs(mean[i] - x[i]) < 3.0 * sigma);
    }
}

// --- training ------------------------------------------------------------------------

TEST_CASE("train: separable blobs, loss falls for the first five epochs") {
    Rng rng(33);
    const auto data = blobs(rng, 256);
    Network<double> net({4}, {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(2), LayerSpec::softmax()}, 33);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 32;
    cfg.epochs = 5;
    cfg.patience = 0;
    const auto r = train(net, data, kNoValidation, cfg);
    REQUIRE(r.history.size() == 5);
    for (std::size_t e = 1; e < 5; ++e) CHECK(r.history[e].train_loss < r.history[e - 1].train_loss);
}

TEST_CASE("train: zero learning rate changes nothing") {
    Rng rng(34);
    const auto data = blobs(rng, 64);
    Network<double> net({4}, {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(2), LayerSpec::softmax()}, 34);
    const auto before = flat_params(net);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    const auto r = train(net, data, kNoValidation, cfg);
    CHECK(flat_params(net) == before);
    for (const auto& e : r.history) CHECK(e.train_loss == doctest::Approx(r.history[0].train_loss).epsilon(1e-12));
}

TEST_CASE("train: same seed, same history and parameters; early stopping restores the best epoch") {
    Rng rng(35);
    const auto data = blobs(rng, 96);
    const auto val = blobs(rng, 32);
    auto run = [&] {
        Network<float> net({4}, {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dropout(0.5), LayerSpec::dense(2), LayerSpec::softmax()}, 35);
        Dataset<float> d32, v32;
        d32.inputs = Tensor<float>(data.inputs.shape);
        v32.inputs = Tensor<float>(val.inputs.shape);
        for (std::size_t i = 0; i < data.inputs.size(); ++i) d32.inputs[i] = static_cast<float>(data.inputs[i]);
        for (std::size_t i = 0; i < val.inputs.size(); ++i) v32.inputs[i] = static_cast<float>(val.inputs[i]);
        d32.labels = data.labels;
        v32.labels = val.labels;
        TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.epochs = 30;
        cfg.patience = 3;
        cfg.seed = 7;
        const auto r = train(net, d32, &v32, cfg);
        std::vector<float> params;
        for (const auto& l : net.layers()) {
            for (const auto& p : l.params) params.insert(params.end(), p.value.values.begin(), p.value.values.end());
        }
        return std::make_pair(r, params);
    };
    const auto [r1, p1] = run();
    const auto [r2, p2] = run();
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t e = 0; e < r1.history.size(); ++e) {
        CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
        CHECK(r1.history[e].val_macc == r2.history[e].val_macc);
    }
    CHECK(p1 == p2);
    double best = -1;
    int best_epoch = 0;
    for (const auto& e : r1.history) {
        CHECK(e.has_validation);
        if (e.val_macc > best) {
            best = e.val_macc;
            best_epoch = e.epoch;
        }
    }
    CHECK(r1.best_epoch == best_epoch);
    CHECK(static_cast<int>(r1.history.size()) <= best_epoch + 3);
}

TEST_CASE("train: non-finite input surfaces as a numeric error") {
    Rng rng(36);
    auto data = blobs(rng, 32);
    data.inputs[5] = std::nan("");
    Network<double> net({4}, {LayerSpec::dense(4), LayerSpec::dense(2), LayerSpec::softmax()}, 36);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(net, data, kNoValidation, cfg), NumericError);
}

TEST_CASE("train: configuration and data checks") {
    TrainConfig cfg;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    Rng rng(37);
    auto data = blobs(rng, 8);
    data.labels.assign(8, Label::Normal);
    Network<double> net({4}, {LayerSpec::dense(2), LayerSpec::softmax()}, 37);
    CHECK_THROWS_AS(train(net, data, kNoValidation, TrainConfig{}), ValidationError);
}

TEST_CASE("persistence: named tensors reload into a fresh network") {
    Rng rng(38);
    const std::vector<LayerSpec> specs = with_head({LayerSpec::conv1d(3, 2), LayerSpec::batchnorm(), LayerSpec::relu()});
    Network<double> a({6, 1}, specs, 1), b({6, 1}, specs, 2);
    gradcheck::jitter(a, rng);
    const auto x = gradcheck::random_inputs(rng, {4, 6, 1});
    a.forward(x, Mode::Train);
    for (const auto& nt : a.named_tensors()) b.load_named(nt.name, nt.tensor->shape, nt.tensor->values);
    const std::vector<double> updates = {static_cast<double>(a.layers()[1].stat_updates)};
    b.load_named("L1.stat_updates", {1}, updates);
    CHECK(a.forward(x, Mode::Infer).values == b.forward(x, Mode::Infer).values);
    CHECK_THROWS_AS(b.load_named("L0.weight", {1, 1}, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS(b.load_named("L9.weight", {1}, std::vector<double>{1.0}), FormatError);
}
