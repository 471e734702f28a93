#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcgcls/data_io.hpp"
#include "pcgcls/random.hpp"

namespace pcg::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. The leading dimension is the batch wherever a
/// tensor flows through a Network.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> values;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), values(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<T> v);

    std::size_t size() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    T& operator[](std::size_t i) { return values[i]; }
    const T& operator[](std::size_t i) const { return values[i]; }
    bool all_finite() const;
};

enum class LayerKind : std::uint8_t {
    Conv1D,
    Conv2D,
    BatchNorm,
    ReLU,
    MaxPool1D,
    MaxPool2D,
    Flatten,
    Dense,
    Dropout,
    Softmax,
};

std::string_view to_string(LayerKind kind);

enum class Padding : std::uint8_t { Same };

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    int kernel_size = 0;
    int stride = 1;
    int n_filters = 0;
    int n_units = 0;
    double dropout_ratio = 0.0;
    Padding padding = Padding::Same;

    static LayerSpec conv1d(int kernel, int filters, int stride = 1) {
        return {LayerKind::Conv1D, kernel, stride, filters, 0, 0.0, Padding::Same};
    }
    static LayerSpec conv2d(int kernel, int filters, int stride = 1) {
        return {LayerKind::Conv2D, kernel, stride, filters, 0, 0.0, Padding::Same};
    }
    static LayerSpec batchnorm() { return {LayerKind::BatchNorm}; }
    static LayerSpec relu() { return {LayerKind::ReLU}; }
    static LayerSpec maxpool1d(int kernel = 2, int stride = 2) { return {LayerKind::MaxPool1D, kernel, stride}; }
    static LayerSpec maxpool2d(int kernel = 2, int stride = 2) { return {LayerKind::MaxPool2D, kernel, stride}; }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }
    static LayerSpec dense(int units) { return {LayerKind::Dense, 0, 1, 0, units}; }
    static LayerSpec dropout(double ratio) { return {LayerKind::Dropout, 0, 1, 0, 0, ratio}; }
    static LayerSpec softmax() { return {LayerKind::Softmax}; }

    void validate() const;
};

enum class Mode : std::uint8_t { Train, Infer };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename T>
struct Parameter {
    std::string name;  // "weight", "bias", "gamma", "beta"
    Tensor<T> value;
    Tensor<T> grad;
};

template <typename T>
struct Layer {
    LayerSpec spec;
    Shape input_shape;   // per sample
    Shape output_shape;  // per sample
    std::vector<Parameter<T>> params;

    // Batch-norm running statistics.
    Tensor<T> running_mean, running_var;
    std::uint64_t stat_updates = 0;

    // Forward caches consumed by backward.
    Tensor<T> input;
    Tensor<T> output;
    std::vector<T> mask;               // dropout
    std::vector<std::uint32_t> argmax;  // max-pool winners (flat input index)
    std::vector<T> xhat, inv_std;      // batch norm
};

/// Ordered layer stack. Per-sample shapes are inferred from the input shape at
/// construction; convolution and dense weights get Glorot-uniform init, biases
/// and beta zero, gamma one.
template <typename T>
class Network {
public:
    Network() = default;
    Network(Shape input_shape, const std::vector<LayerSpec>& specs, std::uint64_t init_seed);

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return layers_.back().output_shape; }
    const std::vector<Layer<T>>& layers() const { return layers_; }
    std::vector<Layer<T>>& layers() { return layers_; }

    void set_dropout_seed(std::uint64_t seed) { dropout_rng_.seed(seed); }
    Rng& dropout_rng() { return dropout_rng_; }

    /// Full forward pass; returns the terminal layer's output (class
    /// probabilities for a softmax-terminated stack). TRAIN caches activations.
    Tensor<T> forward(const Tensor<T>& batch, Mode mode);

    /// Reverse pass seeded with dL/d(logits), i.e. the input of the terminal
    /// softmax, which is skipped. Parameter gradients are overwritten.
    Tensor<T> backward_from_logits(const Tensor<T>& grad_logits);

    /// Reverse pass through every layer seeded with dL/d(output).
    Tensor<T> backward(const Tensor<T>& grad_output);

    void zero_grad();
    std::size_t parameter_count() const;

    /// Index of the first layer whose cached output is non-finite, or -1.
    int first_nonfinite_layer() const;

    /// Parameters and batch-norm statistics in a stable order, for persistence.
    struct NamedTensor {
        std::string name;
        const Tensor<T>* tensor;
    };
    std::vector<NamedTensor> named_tensors() const;
    void load_named(const std::string& name, const Shape& shape, std::span<const T> values);

private:
    Tensor<T> backward_range(Tensor<T> grad, std::size_t end);

    Shape input_shape_;
    std::vector<Layer<T>> layers_;
    Rng dropout_rng_{0};
    bool has_cache_ = false;
};

// Single-layer primitives; exposed so each can be tested in isolation.
template <typename T> Tensor<T> conv_forward(Layer<T>& layer, const Tensor<T>& x);
template <typename T> Tensor<T> maxpool_forward(Layer<T>& layer, const Tensor<T>& x);
template <typename T> Tensor<T> batchnorm_forward(Layer<T>& layer, const Tensor<T>& x, Mode mode);
template <typename T> Tensor<T> dropout_forward(Layer<T>& layer, const Tensor<T>& x, Mode mode, Rng& rng);
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& logits);

struct ClassWeights {
    double normal = 1.0;
    double abnormal = 1.0;

    double of(Label label) const { return label == Label::Normal ? normal : abnormal; }
};

inline constexpr double kProbabilityClamp = 1e-12;

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad_logits;
};

/// loss = mean_b w(y_b) * -log p_b[y_b]; grad = w(y_b) (p_b - onehot) / B.
template <typename T>
LossResult<T> weighted_cross_entropy(const Tensor<T>& probs, std::span<const Label> labels,
                                     const ClassWeights& weights);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter of `net`.
template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state, const AdamConfig& cfg);

template <typename T>
struct Dataset {
    Tensor<T> inputs;  // N x per-sample shape
    std::vector<Label> labels;

    std::size_t size() const { return labels.size(); }
    Tensor<T> gather(std::span<const std::size_t> indices) const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 128;
    int epochs = 50;
    int patience = 10;  // early stop on validation MAcc; <= 0 disables
    ClassWeights class_weights;
    AdamConfig adam;   // learning_rate here is ignored in favour of the field above
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_sensitivity = 0.0;
    double val_specificity = 0.0;
    double val_macc = 0.0;
    bool has_validation = false;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
};

/// Seeded mini-batch Adam training (shuffle, dropout and init all seeded).
/// With a validation set, keeps the parameters of the epoch with the best
/// validation MAcc and stops after `patience` epochs without improvement.
template <typename T>
TrainResult train(Network<T>& net, const Dataset<T>& train_set, const Dataset<T>* validation,
                  const TrainConfig& cfg);

/// Probabilities for every sample, in INFER mode, batch by batch.
template <typename T>
Tensor<T> predict_proba(Network<T>& net, const Tensor<T>& inputs, std::size_t batch_size = 256);

}  // namespace pcg::nn
