#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pcgcls/nn.hpp"
#include "pcgcls/random.hpp"

namespace gradcheck {

using pcg::Label;
using pcg::nn::Network;
using pcg::nn::Tensor;

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;
// Gradients smaller than this are compared absolutely.
inline constexpr double kFloor = 1e-6;

struct Report {
    std::size_t probes = 0;
    std::size_t failures = 0;
    double worst = 0.0;
    // probes that disagree at kStep but agree at a smaller step: the
    // difference straddled a ReLU or max-pool switch
    std::size_t kinks = 0;
    double floor = kFloor;
    // smallest probability of a true class; near the loss clamp the loss is flat
    double min_target_prob = 1.0;
};

inline double relative_error(double analytic, double numeric, double floor = kFloor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Floor at ten times the rounding noise of a central difference of `loss`,
/// scaled so that noise alone stays below the tolerance.
inline double noise_floor(double loss) {
    const double noise = std::numeric_limits<double>::epsilon() * std::abs(loss) / kStep;
    return std::max(kFloor, 10.0 * noise / kTolerance);
}

struct Problem {
    Network<double>* net;
    Tensor<double> inputs;
    std::vector<Label> labels;
    pcg::nn::ClassWeights weights;
    std::uint64_t dropout_seed = 99;

    // TRAIN-mode loss with a fixed dropout mask.
    double loss() {
        net->set_dropout_seed(dropout_seed);
        const auto probs = net->forward(inputs, pcg::nn::Mode::Train);
        return pcg::nn::weighted_cross_entropy(probs, labels, weights).loss;
    }

    // Fills parameter gradients; returns dL/d(input).
    Tensor<double> backprop() {
        net->set_dropout_seed(dropout_seed);
        const auto probs = net->forward(inputs, pcg::nn::Mode::Train);
        const auto lr = pcg::nn::weighted_cross_entropy(probs, labels, weights);
        return net->backward_from_logits(lr.grad_logits);
    }

    double min_target_prob() {
        net->set_dropout_seed(dropout_seed);
        const auto probs = net->forward(inputs, pcg::nn::Mode::Train);
        double m = 1.0;
        for (std::size_t b = 0; b < labels.size(); ++b) {
            m = std::min(m, static_cast<double>(probs[b * 2 + (labels[b] == Label::Abnormal ? 1 : 0)]));
        }
        return m;
    }

    double numeric(double& slot, double step = kStep) {
        const double saved = slot;
        slot = saved + step;
        const double up = loss();
        slot = saved - step;
        const double down = loss();
        slot = saved;
        return (up - down) / (2.0 * step);
    }
};

/// Central differences against backprop for `max_probes` parameters (all when
/// 0) chosen at random, plus `input_probes` input elements.
inline Report check(Problem& p, pcg::Rng& rng, std::size_t max_probes = 0, std::size_t input_probes = 0) {
    const auto grad_input = p.backprop();
    struct Slot {
        double* value;
        double analytic;
    };
    std::vector<Slot> slots;
    for (auto& layer : p.net->layers()) {
        for (auto& param : layer.params) {
            for (std::size_t i = 0; i < param.value.size(); ++i) slots.push_back({&param.value[i], param.grad[i]});
        }
    }
    if (max_probes && max_probes < slots.size()) {
        pcg::shuffle(slots, rng);
        slots.resize(max_probes);
    }
    Report r;
    r.floor = noise_floor(p.loss());
    r.min_target_prob = p.min_target_prob();
    auto record = [&r, &p](double analytic, double& slot) {
        ++r.probes;
        const double e = relative_error(analytic, p.numeric(slot), r.floor);
        if (e < kTolerance) {
            r.worst = std::max(r.worst, e);
            return;
        }
        for (double step : {kStep * 1e-2, kStep * 1e-4}) {
            if (relative_error(analytic, p.numeric(slot, step), r.floor) < kTolerance) {
                ++r.kinks;
                return;
            }
        }
        r.worst = std::max(r.worst, e);
        ++r.failures;
    };
    for (auto& s : slots) record(s.analytic, *s.value);
    for (std::size_t k = 0; k < input_probes; ++k) {
        const std::size_t i = pcg::uniform_index(rng, p.inputs.size());
        record(grad_input[i], p.inputs[i]);
    }
    return r;
}

inline Tensor<double> random_inputs(pcg::Rng& rng, pcg::nn::Shape shape) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values) v = pcg::standard_normal(rng);
    return t;
}

/// Perturbs every parameter so that BN gamma/beta and biases are not at their
/// symmetric initial values.
inline void jitter(Network<double>& net, pcg::Rng& rng, double scale = 0.3) {
    for (auto& layer : net.layers()) {
        for (auto& param : layer.params) {
            for (auto& v : param.value.values) v += scale * pcg::standard_normal(rng);
        }
    }
}

inline std::vector<Label> random_labels(pcg::Rng& rng, std::size_t n) {
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2 ? Label::Abnormal : Label::Normal;
    pcg::shuffle(labels, rng);
    return labels;
}

}  // namespace gradcheck
