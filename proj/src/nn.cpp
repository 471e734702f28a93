#include "pcgcls/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcgcls/error.hpp"
#include "pcgcls/metrics.hpp"

namespace pcg::nn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += " x ";
        s += std::to_string(shape[i]);
    }
    return s;
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
    }
}

template <typename T>
bool Tensor<T>::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv1D: return "conv1d";
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool1D: return "maxpool1d";
        case LayerKind::MaxPool2D: return "maxpool2d";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::Conv1D:
        case LayerKind::Conv2D:
            if (kernel_size < 1 || n_filters < 1 || stride < 1) {
                throw ConfigError("convolution needs kernel_size, n_filters and stride >= 1");
            }
            if (padding != Padding::Same) throw ConfigError("convolutions use SAME padding");
            break;
        case LayerKind::MaxPool1D:
        case LayerKind::MaxPool2D:
            if (kernel_size < 1 || stride < 1) throw ConfigError("pooling needs kernel_size and stride >= 1");
            break;
        case LayerKind::Dense:
            if (n_units < 1) throw ConfigError("dense layer needs n_units >= 1");
            break;
        case LayerKind::Dropout:
            if (!(dropout_ratio >= 0.0 && dropout_ratio < 1.0)) throw ConfigError("dropout ratio must lie in [0, 1)");
            break;
        default: break;
    }
}

namespace {

std::size_t same_out(std::size_t in, int stride) {
    return (in + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
}

// Leading zero padding of a SAME convolution (the remainder goes after).
long same_pad_before(std::size_t in, std::size_t out, int kernel, int stride) {
    const long total = std::max(0L, static_cast<long>((out - 1) * static_cast<std::size_t>(stride)) + kernel -
                                        static_cast<long>(in));
    return total / 2;
}

std::size_t pool_out(std::size_t in, int kernel, int stride) {
    if (in < static_cast<std::size_t>(kernel)) return 0;
    return (in - static_cast<std::size_t>(kernel)) / static_cast<std::size_t>(stride) + 1;
}

[[noreturn]] void shape_error(std::size_t index, const LayerSpec& spec, const std::string& msg) {
    throw ShapeError("layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) + "): " + msg);
}

template <typename T>
void glorot(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.values) v = static_cast<T>(uniform(rng, -limit, limit));
}

template <typename T>
void check_batch_shape(const Layer<T>& layer, const Tensor<T>& x, std::size_t index) {
    if (x.rank() != layer.input_shape.size() + 1 ||
        !std::equal(layer.input_shape.begin(), layer.input_shape.end(), x.shape.begin() + 1)) {
        shape_error(index, layer.spec, "expected input " + shape_string(layer.input_shape) + " per sample, got " +
                                           shape_string(Shape(x.shape.begin() + (x.rank() ? 1 : 0), x.shape.end())));
    }
}

}  // namespace

template <typename T>
Network<T>::Network(Shape input_shape, const std::vector<LayerSpec>& specs, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)) {
    if (specs.empty()) throw ConfigError("network needs at least one layer");
    Rng rng(derive_seed(init_seed, "init"));
    dropout_rng_.seed(derive_seed(init_seed, "dropout"));
    Shape shape = input_shape_;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& spec = specs[i];
        spec.validate();
        Layer<T> layer;
        layer.spec = spec;
        layer.input_shape = shape;
        switch (spec.kind) {
            case LayerKind::Conv1D: {
                if (shape.size() != 2) shape_error(i, spec, "expects length x channels input, got " + shape_string(shape));
                const std::size_t k = static_cast<std::size_t>(spec.kernel_size), cin = shape[1],
                                  cout = static_cast<std::size_t>(spec.n_filters);
                layer.output_shape = {same_out(shape[0], spec.stride), cout};
                Parameter<T> w{"weight", Tensor<T>({k, cin, cout}), Tensor<T>({k, cin, cout})};
                glorot(w.value, k * cin, k * cout, rng);
                layer.params.push_back(std::move(w));
                layer.params.push_back({"bias", Tensor<T>({cout}), Tensor<T>({cout})});
                break;
            }
            case LayerKind::Conv2D: {
                if (shape.size() != 3) shape_error(i, spec, "expects height x width x channels input, got " + shape_string(shape));
                const std::size_t k = static_cast<std::size_t>(spec.kernel_size), cin = shape[2],
                                  cout = static_cast<std::size_t>(spec.n_filters);
                layer.output_shape = {same_out(shape[0], spec.stride), same_out(shape[1], spec.stride), cout};
                Parameter<T> w{"weight", Tensor<T>({k, k, cin, cout}), Tensor<T>({k, k, cin, cout})};
                glorot(w.value, k * k * cin, k * k * cout, rng);
                layer.params.push_back(std::move(w));
                layer.params.push_back({"bias", Tensor<T>({cout}), Tensor<T>({cout})});
                break;
            }
            case LayerKind::BatchNorm: {
                const std::size_t c = shape.back();
                layer.output_shape = shape;
                layer.params.push_back({"gamma", Tensor<T>({c}, T(1)), Tensor<T>({c})});
                layer.params.push_back({"beta", Tensor<T>({c}), Tensor<T>({c})});
                layer.running_mean = Tensor<T>({c});
                layer.running_var = Tensor<T>({c}, T(1));
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Dropout:
            case LayerKind::Softmax:
                layer.output_shape = shape;
                break;
            case LayerKind::MaxPool1D:
                if (shape.size() != 2) shape_error(i, spec, "expects length x channels input");
                layer.output_shape = {pool_out(shape[0], spec.kernel_size, spec.stride), shape[1]};
                break;
            case LayerKind::MaxPool2D:
                if (shape.size() != 3) shape_error(i, spec, "expects height x width x channels input");
                layer.output_shape = {pool_out(shape[0], spec.kernel_size, spec.stride),
                                      pool_out(shape[1], spec.kernel_size, spec.stride), shape[2]};
                break;
            case LayerKind::Flatten:
                layer.output_shape = {shape_size(shape)};
                break;
            case LayerKind::Dense: {
                if (shape.size() != 1) shape_error(i, spec, "expects a flat input, got " + shape_string(shape));
                const std::size_t in = shape[0], out = static_cast<std::size_t>(spec.n_units);
                layer.output_shape = {out};
                Parameter<T> w{"weight", Tensor<T>({in, out}), Tensor<T>({in, out})};
                glorot(w.value, in, out, rng);
                layer.params.push_back(std::move(w));
                layer.params.push_back({"bias", Tensor<T>({out}), Tensor<T>({out})});
                break;
            }
        }
        if (shape_size(layer.output_shape) == 0) shape_error(i, spec, "output would be empty");
        shape = layer.output_shape;
        layers_.push_back(std::move(layer));
    }
}

// --- layer primitives -------------------------------------------------------

template <typename T>
Tensor<T> conv_forward(Layer<T>& layer, const Tensor<T>& x) {
    const auto& spec = layer.spec;
    const std::size_t batch = x.shape[0];
    const auto& W = layer.params[0].value.values;
    const auto& bias = layer.params[1].value.values;
    Shape out_shape{batch};
    out_shape.insert(out_shape.end(), layer.output_shape.begin(), layer.output_shape.end());
    Tensor<T> y(out_shape);
    const long k = spec.kernel_size;
    const auto s = static_cast<std::size_t>(spec.stride);

    if (spec.kind == LayerKind::Conv1D) {
        const std::size_t len = x.shape[1], cin = x.shape[2];
        const std::size_t olen = layer.output_shape[0], cout = layer.output_shape[1];
        const long pad = same_pad_before(len, olen, spec.kernel_size, spec.stride);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < olen; ++o) {
                T* out = &y.values[(b * olen + o) * cout];
                std::copy(bias.begin(), bias.end(), out);
                for (long kk = 0; kk < k; ++kk) {
                    const long pos = static_cast<long>(o * s) + kk - pad;
                    if (pos < 0 || pos >= static_cast<long>(len)) continue;
                    const T* in = &x.values[(b * len + static_cast<std::size_t>(pos)) * cin];
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const T xv = in[ci];
                        const T* w = &W[(static_cast<std::size_t>(kk) * cin + ci) * cout];
                        for (std::size_t co = 0; co < cout; ++co) out[co] += xv * w[co];
                    }
                }
            }
        }
    } else {
        const std::size_t h = x.shape[1], wd = x.shape[2], cin = x.shape[3];
        const std::size_t oh = layer.output_shape[0], ow = layer.output_shape[1], cout = layer.output_shape[2];
        const long pad_h = same_pad_before(h, oh, spec.kernel_size, spec.stride);
        const long pad_w = same_pad_before(wd, ow, spec.kernel_size, spec.stride);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j) {
                    T* out = &y.values[((b * oh + i) * ow + j) * cout];
                    std::copy(bias.begin(), bias.end(), out);
                    for (long ki = 0; ki < k; ++ki) {
                        const long r = static_cast<long>(i * s) + ki - pad_h;
                        if (r < 0 || r >= static_cast<long>(h)) continue;
                        for (long kj = 0; kj < k; ++kj) {
                            const long c = static_cast<long>(j * s) + kj - pad_w;
                            if (c < 0 || c >= static_cast<long>(wd)) continue;
                            const T* in = &x.values[((b * h + static_cast<std::size_t>(r)) * wd + static_cast<std::size_t>(c)) * cin];
                            const T* wbase = &W[((static_cast<std::size_t>(ki) * static_cast<std::size_t>(k) +
                                                  static_cast<std::size_t>(kj)) * cin) * cout];
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                                const T xv = in[ci];
                                const T* w = wbase + ci * cout;
                                for (std::size_t co = 0; co < cout; ++co) out[co] += xv * w[co];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
static Tensor<T> conv_backward(Layer<T>& layer, const Tensor<T>& g) {
    const auto& spec = layer.spec;
    const Tensor<T>& x = layer.input;
    const std::size_t batch = x.shape[0];
    const auto& W = layer.params[0].value.values;
    auto& dW = layer.params[0].grad.values;
    auto& db = layer.params[1].grad.values;
    Tensor<T> dx(x.shape);
    const long k = spec.kernel_size;
    const auto s = static_cast<std::size_t>(spec.stride);

    if (spec.kind == LayerKind::Conv1D) {
        const std::size_t len = x.shape[1], cin = x.shape[2];
        const std::size_t olen = layer.output_shape[0], cout = layer.output_shape[1];
        const long pad = same_pad_before(len, olen, spec.kernel_size, spec.stride);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < olen; ++o) {
                const T* go = &g.values[(b * olen + o) * cout];
                for (std::size_t co = 0; co < cout; ++co) db[co] += go[co];
                for (long kk = 0; kk < k; ++kk) {
                    const long pos = static_cast<long>(o * s) + kk - pad;
                    if (pos < 0 || pos >= static_cast<long>(len)) continue;
                    const std::size_t base = (b * len + static_cast<std::size_t>(pos)) * cin;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const std::size_t widx = (static_cast<std::size_t>(kk) * cin + ci) * cout;
                        const T xv = x.values[base + ci];
                        T acc = 0;
                        for (std::size_t co = 0; co < cout; ++co) {
                            dW[widx + co] += xv * go[co];
                            acc += W[widx + co] * go[co];
                        }
                        dx.values[base + ci] += acc;
                    }
                }
            }
        }
    } else {
        const std::size_t h = x.shape[1], wd = x.shape[2], cin = x.shape[3];
        const std::size_t oh = layer.output_shape[0], ow = layer.output_shape[1], cout = layer.output_shape[2];
        const long pad_h = same_pad_before(h, oh, spec.kernel_size, spec.stride);
        const long pad_w = same_pad_before(wd, ow, spec.kernel_size, spec.stride);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j) {
                    const T* go = &g.values[((b * oh + i) * ow + j) * cout];
                    for (std::size_t co = 0; co < cout; ++co) db[co] += go[co];
                    for (long ki = 0; ki < k; ++ki) {
                        const long r = static_cast<long>(i * s) + ki - pad_h;
                        if (r < 0 || r >= static_cast<long>(h)) continue;
                        for (long kj = 0; kj < k; ++kj) {
                            const long c = static_cast<long>(j * s) + kj - pad_w;
                            if (c < 0 || c >= static_cast<long>(wd)) continue;
                            const std::size_t base =
                                ((b * h + static_cast<std::size_t>(r)) * wd + static_cast<std::size_t>(c)) * cin;
                            const std::size_t wbase = ((static_cast<std::size_t>(ki) * static_cast<std::size_t>(k) +
                                                        static_cast<std::size_t>(kj)) * cin) * cout;
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                                const std::size_t widx = wbase + ci * cout;
                                const T xv = x.values[base + ci];
                                T acc = 0;
                                for (std::size_t co = 0; co < cout; ++co) {
                                    dW[widx + co] += xv * go[co];
                                    acc += W[widx + co] * go[co];
                                }
                                dx.values[base + ci] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

template <typename T>
Tensor<T> maxpool_forward(Layer<T>& layer, const Tensor<T>& x) {
    const auto& spec = layer.spec;
    const std::size_t batch = x.shape[0];
    Shape out_shape{batch};
    out_shape.insert(out_shape.end(), layer.output_shape.begin(), layer.output_shape.end());
    Tensor<T> y(out_shape);
    layer.argmax.assign(y.size(), 0);
    const auto k = static_cast<std::size_t>(spec.kernel_size);
    const auto s = static_cast<std::size_t>(spec.stride);

    if (spec.kind == LayerKind::MaxPool1D) {
        const std::size_t len = x.shape[1], c = x.shape[2], olen = layer.output_shape[0];
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < olen; ++o)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    std::size_t best = (b * len + o * s) * c + ch;
                    for (std::size_t kk = 1; kk < k; ++kk) {
                        const std::size_t idx = (b * len + o * s + kk) * c + ch;
                        if (x.values[idx] > x.values[best]) best = idx;
                    }
                    const std::size_t out = (b * olen + o) * c + ch;
                    y.values[out] = x.values[best];
                    layer.argmax[out] = static_cast<std::uint32_t>(best);
                }
    } else {
        const std::size_t h = x.shape[1], w = x.shape[2], c = x.shape[3];
        const std::size_t oh = layer.output_shape[0], ow = layer.output_shape[1];
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        std::size_t best = ((b * h + i * s) * w + j * s) * c + ch;
                        for (std::size_t ki = 0; ki < k; ++ki)
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const std::size_t idx = ((b * h + i * s + ki) * w + j * s + kj) * c + ch;
                                if (x.values[idx] > x.values[best]) best = idx;
                            }
                        const std::size_t out = ((b * oh + i) * ow + j) * c + ch;
                        y.values[out] = x.values[best];
                        layer.argmax[out] = static_cast<std::uint32_t>(best);
                    }
    }
    return y;
}

template <typename T>
Tensor<T> batchnorm_forward(Layer<T>& layer, const Tensor<T>& x, Mode mode) {
    const std::size_t c = x.shape.back();
    const std::size_t rows = x.size() / c;
    const auto& gamma = layer.params[0].value.values;
    const auto& beta = layer.params[1].value.values;
    Tensor<T> y(x.shape);
    if (mode == Mode::Infer) {
        if (layer.stat_updates == 0) {
            throw ValidationError("batch norm used for inference before any training update");
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(layer.running_var.values[ch]) + kBatchNormEpsilon);
            const double scale = gamma[ch] * inv;
            const double shift = beta[ch] - scale * layer.running_mean.values[ch];
            for (std::size_t r = 0; r < rows; ++r) {
                y.values[r * c + ch] = static_cast<T>(scale * x.values[r * c + ch] + shift);
            }
        }
        return y;
    }
    if (x.shape[0] < 2) throw ValidationError("batch norm in TRAIN mode needs a batch of at least 2");
    layer.xhat.assign(x.size(), T(0));
    layer.inv_std.assign(c, T(0));
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += x.values[r * c + ch];
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = x.values[r * c + ch] - mean;
            var += d * d;
        }
        var /= static_cast<double>(rows);
        const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        layer.inv_std[ch] = static_cast<T>(inv);
        for (std::size_t r = 0; r < rows; ++r) {
            const double xh = (x.values[r * c + ch] - mean) * inv;
            layer.xhat[r * c + ch] = static_cast<T>(xh);
            y.values[r * c + ch] = static_cast<T>(gamma[ch] * xh + beta[ch]);
        }
        auto& rm = layer.running_mean.values[ch];
        auto& rv = layer.running_var.values[ch];
        rm = static_cast<T>(kBatchNormMomentum * rm + (1.0 - kBatchNormMomentum) * mean);
        rv = static_cast<T>(kBatchNormMomentum * rv + (1.0 - kBatchNormMomentum) * var);
    }
    ++layer.stat_updates;
    return y;
}

template <typename T>
static Tensor<T> batchnorm_backward(Layer<T>& layer, const Tensor<T>& g) {
    const std::size_t c = g.shape.back();
    const std::size_t rows = g.size() / c;
    const auto& gamma = layer.params[0].value.values;
    auto& dgamma = layer.params[0].grad.values;
    auto& dbeta = layer.params[1].grad.values;
    Tensor<T> dx(g.shape);
    const double n = static_cast<double>(rows);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double gv = g.values[r * c + ch];
            sum_g += gv;
            sum_gx += gv * layer.xhat[r * c + ch];
        }
        dbeta[ch] += static_cast<T>(sum_g);
        dgamma[ch] += static_cast<T>(sum_gx);
        const double k = gamma[ch] * layer.inv_std[ch] / n;
        for (std::size_t r = 0; r < rows; ++r) {
            const double gv = g.values[r * c + ch];
            dx.values[r * c + ch] = static_cast<T>(k * (n * gv - sum_g - layer.xhat[r * c + ch] * sum_gx));
        }
    }
    return dx;
}

template <typename T>
Tensor<T> dropout_forward(Layer<T>& layer, const Tensor<T>& x, Mode mode, Rng& rng) {
    const double ratio = layer.spec.dropout_ratio;
    if (mode == Mode::Infer || ratio == 0.0) {
        layer.mask.assign(x.size(), T(1));
        return x;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - ratio));
    layer.mask.resize(x.size());
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        layer.mask[i] = uniform01(rng) >= ratio ? scale : T(0);
        y.values[i] = x.values[i] * layer.mask[i];
    }
    return y;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    const std::size_t k = logits.shape.back();
    const std::size_t rows = logits.size() / k;
    Tensor<T> p(logits.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* z = &logits.values[r * k];
        const T zmax = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j] - zmax));
        for (std::size_t j = 0; j < k; ++j) {
            p.values[r * k + j] = static_cast<T>(std::exp(static_cast<double>(z[j] - zmax)) / sum);
        }
    }
    return p;
}

template <typename T>
static Tensor<T> dense_forward(Layer<T>& layer, const Tensor<T>& x) {
    const std::size_t batch = x.shape[0], in = layer.input_shape[0], out = layer.output_shape[0];
    const auto& W = layer.params[0].value.values;
    const auto& bias = layer.params[1].value.values;
    Tensor<T> y({batch, out});
    for (std::size_t b = 0; b < batch; ++b) {
        T* yo = &y.values[b * out];
        std::copy(bias.begin(), bias.end(), yo);
        const T* xi = &x.values[b * in];
        for (std::size_t i = 0; i < in; ++i) {
            const T xv = xi[i];
            if (xv == T(0)) continue;
            const T* w = &W[i * out];
            for (std::size_t o = 0; o < out; ++o) yo[o] += xv * w[o];
        }
    }
    return y;
}

template <typename T>
static Tensor<T> dense_backward(Layer<T>& layer, const Tensor<T>& g) {
    const Tensor<T>& x = layer.input;
    const std::size_t batch = x.shape[0], in = layer.input_shape[0], out = layer.output_shape[0];
    const auto& W = layer.params[0].value.values;
    auto& dW = layer.params[0].grad.values;
    auto& db = layer.params[1].grad.values;
    Tensor<T> dx(x.shape);
    for (std::size_t b = 0; b < batch; ++b) {
        const T* go = &g.values[b * out];
        for (std::size_t o = 0; o < out; ++o) db[o] += go[o];
        const T* xi = &x.values[b * in];
        for (std::size_t i = 0; i < in; ++i) {
            const T xv = xi[i];
            T* dw = &dW[i * out];
            const T* w = &W[i * out];
            T acc = 0;
            for (std::size_t o = 0; o < out; ++o) {
                dw[o] += xv * go[o];
                acc += w[o] * go[o];
            }
            dx.values[b * in + i] = acc;
        }
    }
    return dx;
}

// --- network ------------------------------------------------------------------

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& batch, Mode mode) {
    if (layers_.empty()) throw ValidationError("forward on an empty network");
    if (batch.rank() == 0 || batch.shape[0] == 0) throw ShapeError("forward needs a non-empty batch");
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer<T>& layer = layers_[i];
        check_batch_shape(layer, x, i);
        Tensor<T> y;
        switch (layer.spec.kind) {
            case LayerKind::Conv1D:
            case LayerKind::Conv2D: y = conv_forward(layer, x); break;
            case LayerKind::BatchNorm: y = batchnorm_forward(layer, x, mode); break;
            case LayerKind::ReLU:
                y = x;
                for (auto& v : y.values) v = v > T(0) ? v : T(0);
                break;
            case LayerKind::MaxPool1D:
            case LayerKind::MaxPool2D: y = maxpool_forward(layer, x); break;
            case LayerKind::Flatten:
                y = x;
                y.shape = {x.shape[0], shape_size(layer.output_shape)};
                break;
            case LayerKind::Dense: y = dense_forward(layer, x); break;
            case LayerKind::Dropout: y = dropout_forward(layer, x, mode, dropout_rng_); break;
            case LayerKind::Softmax: y = softmax_rows(x); break;
        }
        if (mode == Mode::Train) {
            layer.input = std::move(x);
            layer.output = y;
        }
        x = std::move(y);
    }
    has_cache_ = mode == Mode::Train;
    return x;
}

template <typename T>
void Network<T>::zero_grad() {
    for (auto& layer : layers_)
        for (auto& p : layer.params) std::fill(p.grad.values.begin(), p.grad.values.end(), T(0));
}

template <typename T>
Tensor<T> Network<T>::backward_range(Tensor<T> g, std::size_t end) {
    if (!has_cache_) throw ValidationError("backward called without a cached TRAIN forward pass");
    zero_grad();
    for (std::size_t idx = end; idx-- > 0;) {
        Layer<T>& layer = layers_[idx];
        if (g.shape != layer.output.shape) {
            shape_error(idx, layer.spec, "gradient shape " + shape_string(g.shape) + " does not match output " +
                                             shape_string(layer.output.shape));
        }
        Tensor<T> dx;
        switch (layer.spec.kind) {
            case LayerKind::Conv1D:
            case LayerKind::Conv2D: dx = conv_backward(layer, g); break;
            case LayerKind::BatchNorm: dx = batchnorm_backward(layer, g); break;
            case LayerKind::ReLU:
                dx = std::move(g);
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    if (!(layer.input.values[i] > T(0))) dx.values[i] = T(0);
                }
                break;
            case LayerKind::MaxPool1D:
            case LayerKind::MaxPool2D:
                dx = Tensor<T>(layer.input.shape);
                for (std::size_t i = 0; i < g.size(); ++i) dx.values[layer.argmax[i]] += g.values[i];
                break;
            case LayerKind::Flatten:
                dx = std::move(g);
                dx.shape = layer.input.shape;
                break;
            case LayerKind::Dense: dx = dense_backward(layer, g); break;
            case LayerKind::Dropout:
                dx = std::move(g);
                for (std::size_t i = 0; i < dx.size(); ++i) dx.values[i] *= layer.mask[i];
                break;
            case LayerKind::Softmax: {
                const std::size_t k = g.shape.back();
                dx = Tensor<T>(g.shape);
                for (std::size_t r = 0; r < g.size() / k; ++r) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < k; ++j) dot += g.values[r * k + j] * layer.output.values[r * k + j];
                    for (std::size_t j = 0; j < k; ++j) {
                        dx.values[r * k + j] = static_cast<T>(layer.output.values[r * k + j] * (g.values[r * k + j] - dot));
                    }
                }
                break;
            }
        }
        g = std::move(dx);
    }
    return g;
}

template <typename T>
Tensor<T> Network<T>::backward_from_logits(const Tensor<T>& grad_logits) {
    if (layers_.empty() || layers_.back().spec.kind != LayerKind::Softmax) {
        throw ValidationError("backward_from_logits needs a softmax-terminated network");
    }
    return backward_range(grad_logits, layers_.size() - 1);
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_output) {
    return backward_range(grad_output, layers_.size());
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_)
        for (const auto& p : layer.params) n += p.value.size();
    return n;
}

template <typename T>
int Network<T>::first_nonfinite_layer() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i].output.all_finite()) return static_cast<int>(i);
        for (const auto& p : layers_[i].params) {
            if (!p.value.all_finite()) return static_cast<int>(i);
        }
    }
    return -1;
}

template <typename T>
std::vector<typename Network<T>::NamedTensor> Network<T>::named_tensors() const {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string prefix = "L" + std::to_string(i) + ".";
        for (const auto& p : layers_[i].params) out.push_back({prefix + p.name, &p.value});
        if (layers_[i].spec.kind == LayerKind::BatchNorm) {
            out.push_back({prefix + "running_mean", &layers_[i].running_mean});
            out.push_back({prefix + "running_var", &layers_[i].running_var});
        }
    }
    return out;
}

template <typename T>
void Network<T>::load_named(const std::string& name, const Shape& shape, std::span<const T> values) {
    const auto dot = name.find('.');
    if (name.empty() || name[0] != 'L' || dot == std::string::npos) throw FormatError("bad parameter name " + name);
    const auto index = static_cast<std::size_t>(std::stoul(name.substr(1, dot - 1)));
    if (index >= layers_.size()) throw FormatError("parameter " + name + " names a missing layer");
    Layer<T>& layer = layers_[index];
    const std::string field = name.substr(dot + 1);
    Tensor<T>* target = nullptr;
    for (auto& p : layer.params) {
        if (p.name == field) target = &p.value;
    }
    if (field == "running_mean") target = &layer.running_mean;
    if (field == "running_var") target = &layer.running_var;
    if (field == "stat_updates") {
        if (values.size() != 1) throw FormatError("stat_updates must be a scalar");
        layer.stat_updates = static_cast<std::uint64_t>(values[0]);
        return;
    }
    if (!target) throw FormatError("unknown parameter " + name);
    if (target->shape != shape) {
        throw ShapeError("parameter " + name + " has shape " + shape_string(shape) + ", expected " +
                         shape_string(target->shape));
    }
    target->values.assign(values.begin(), values.end());
}

// --- loss and optimiser ----------------------------------------------------

template <typename T>
LossResult<T> weighted_cross_entropy(const Tensor<T>& probs, std::span<const Label> labels,
                                     const ClassWeights& weights) {
    if (probs.rank() != 2 || probs.shape[1] != 2) throw ShapeError("loss expects batch x 2 probabilities");
    const std::size_t batch = probs.shape[0];
    if (labels.size() != batch) throw ShapeError("label count does not match batch size");
    LossResult<T> res;
    res.grad_logits = Tensor<T>(probs.shape);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t y = labels[b] == Label::Abnormal ? 1 : 0;
        const double w = weights.of(labels[b]);
        const double p = std::max(static_cast<double>(probs.values[b * 2 + y]), kProbabilityClamp);
        total += w * -std::log(p);
        for (std::size_t j = 0; j < 2; ++j) {
            const double target = j == y ? 1.0 : 0.0;
            res.grad_logits.values[b * 2 + j] =
                static_cast<T>(w * (static_cast<double>(probs.values[b * 2 + j]) - target) / static_cast<double>(batch));
        }
    }
    res.loss = total / static_cast<double>(batch);
    return res;
}

template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state, const AdamConfig& cfg) {
    std::vector<Parameter<T>*> params;
    for (auto& layer : net.layers())
        for (auto& p : layer.params) params.push_back(&p);
    if (state.m.empty()) {
        for (auto* p : params) {
            state.m.emplace_back(p->value.size(), T(0));
            state.v.emplace_back(p->value.size(), T(0));
        }
    }
    if (state.m.size() != params.size()) throw ValidationError("Adam state does not match the network");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i]->value.values;
        const auto& grad = params[i]->grad.values;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / c1;
            const double vhat = vj / c2;
            value[j] = static_cast<T>(value[j] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
}

// --- training -----------------------------------------------------------------

template <typename T>
Tensor<T> Dataset<T>::gather(std::span<const std::size_t> indices) const {
    const std::size_t per = inputs.size() / std::max<std::size_t>(inputs.shape[0], 1);
    Shape shape = inputs.shape;
    shape[0] = indices.size();
    Tensor<T> out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(inputs.values.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                    out.values.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batch norm)");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(class_weights.normal > 0.0 && class_weights.abnormal > 0.0)) throw ConfigError("class weights must be positive");
}

template <typename T>
Tensor<T> predict_proba(Network<T>& net, const Tensor<T>& inputs, std::size_t batch_size) {
    const std::size_t n = inputs.shape[0];
    const std::size_t per = n ? inputs.size() / n : 0;
    Tensor<T> out({n, shape_size(net.output_shape())});
    const std::size_t k = out.shape[1];
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t m = std::min(batch_size, n - start);
        Shape shape = inputs.shape;
        shape[0] = m;
        Tensor<T> batch(shape, std::vector<T>(inputs.values.begin() + static_cast<std::ptrdiff_t>(start * per),
                                              inputs.values.begin() + static_cast<std::ptrdiff_t>((start + m) * per)));
        const auto p = net.forward(batch, Mode::Infer);
        std::copy(p.values.begin(), p.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(start * k));
    }
    return out;
}

namespace {

template <typename T>
void validation_pass(Network<T>& net, const Dataset<T>& val, const ClassWeights& weights, EpochRecord& rec) {
    const auto probs = predict_proba(net, val.inputs);
    if (!probs.all_finite()) {
        throw NumericError("non-finite validation output at epoch " + std::to_string(rec.epoch));
    }
    rec.val_loss = weighted_cross_entropy(probs, val.labels, weights).loss;
    std::vector<Prediction> preds;
    preds.reserve(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        // Ties resolve to ABNORMAL.
        const Label p = probs.values[i * 2 + 1] >= probs.values[i * 2] ? Label::Abnormal : Label::Normal;
        preds.push_back({val.labels[i], p});
    }
    const auto report = evaluate(preds);
    rec.has_validation = true;
    rec.val_accuracy = report.accuracy.value_or(0.0);
    rec.val_sensitivity = report.sensitivity.value_or(0.0);
    rec.val_specificity = report.specificity.value_or(0.0);
    rec.val_macc = report.macc.value_or(report.accuracy.value_or(0.0));
}

template <typename T>
std::vector<std::vector<T>> snapshot(const Network<T>& net) {
    std::vector<std::vector<T>> s;
    for (const auto& nt : net.named_tensors()) s.push_back(nt.tensor->values);
    return s;
}

template <typename T>
void restore(Network<T>& net, const std::vector<std::vector<T>>& s) {
    const auto named = net.named_tensors();
    for (std::size_t i = 0; i < named.size(); ++i) const_cast<Tensor<T>*>(named[i].tensor)->values = s[i];
}

}  // namespace

template <typename T>
TrainResult train(Network<T>& net, const Dataset<T>& train_set, const Dataset<T>* validation,
                  const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = train_set.size();
    if (n == 0) throw ValidationError("training set is empty");
    const bool has_normal = std::count(train_set.labels.begin(), train_set.labels.end(), Label::Normal) > 0;
    const bool has_abnormal = std::count(train_set.labels.begin(), train_set.labels.end(), Label::Abnormal) > 0;
    if (!has_normal || !has_abnormal) throw ValidationError("training set must contain both classes");
    if (validation && validation->size() == 0) validation = nullptr;

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    net.set_dropout_seed(derive_seed(cfg.seed, "dropout"));
    AdamState<T> adam;
    AdamConfig adam_cfg = cfg.adam;
    adam_cfg.learning_rate = cfg.learning_rate;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    TrainResult result;
    double best_macc = -1.0;
    int since_best = 0;
    std::vector<std::vector<T>> best_params;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        // Batches of bs; a trailing single sample joins the previous batch.
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t start = 0; start < n; start += bs) batches.emplace_back(start, std::min(n, start + bs));
        if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
            batches[batches.size() - 2].second = batches.back().second;
            batches.pop_back();
        }
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto [lo, hi] = batches[bi];
            const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
            const auto x = train_set.gather(idx);
            std::vector<Label> y(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) y[i] = train_set.labels[idx[i]];

            const auto probs = net.forward(x, Mode::Train);
            const auto loss = weighted_cross_entropy(probs, y, cfg.class_weights);
            if (!std::isfinite(loss.loss)) {
                const int bad = net.first_nonfinite_layer();
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi) +
                                   (bad >= 0 ? ", first non-finite layer " + std::to_string(bad) + " (" +
                                                   std::string(to_string(net.layers()[static_cast<std::size_t>(bad)].spec.kind)) + ")"
                                             : std::string(", layers finite")));
            }
            net.backward_from_logits(loss.grad_logits);
            adam_step(net, adam, adam_cfg);
            loss_sum += loss.loss * static_cast<double>(idx.size());
            seen += idx.size();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        if (validation) validation_pass(net, *validation, cfg.class_weights, rec);
        result.history.push_back(rec);

        if (validation) {
            if (rec.val_macc > best_macc) {
                best_macc = rec.val_macc;
                best_params = snapshot(net);
                result.best_epoch = epoch;
                since_best = 0;
            } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
                break;
            }
        } else {
            result.best_epoch = epoch;
        }
    }
    if (validation && !best_params.empty()) restore(net, best_params);
    return result;
}

#define PCG_INSTANTIATE(T)                                                                                   \
    template struct Tensor<T>;                                                                               \
    template class Network<T>;                                                                               \
    template Tensor<T> conv_forward<T>(Layer<T>&, const Tensor<T>&);                                         \
    template Tensor<T> maxpool_forward<T>(Layer<T>&, const Tensor<T>&);                                      \
    template Tensor<T> batchnorm_forward<T>(Layer<T>&, const Tensor<T>&, Mode);                              \
    template Tensor<T> dropout_forward<T>(Layer<T>&, const Tensor<T>&, Mode, Rng&);                          \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                                    \
    template LossResult<T> weighted_cross_entropy<T>(const Tensor<T>&, std::span<const Label>,               \
                                                     const ClassWeights&);                                   \
    template void adam_step<T>(Network<T>&, AdamState<T>&, const AdamConfig&);                               \
    template struct Dataset<T>;                                                                              \
    template TrainResult train<T>(Network<T>&, const Dataset<T>&, const Dataset<T>*, const TrainConfig&);    \
    template Tensor<T> predict_proba<T>(Network<T>&, const Tensor<T>&, std::size_t);

PCG_INSTANTIATE(float)
PCG_INSTANTIATE(double)

#undef PCG_INSTANTIATE

}  // namespace pcg::nn
