#include "pcgcls/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pcgcls/binary_io.hpp"
#include "pcgcls/error.hpp"

namespace pcg {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Cnn1d: return "cnn1d";
        case ModelKind::Cnn2d: return "cnn2d";
        case ModelKind::Ecnn: return "ecnn";
        case ModelKind::Hmm: return "hmm";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view token) {
    std::string t(token);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "cnn1d" || t == "1d-cnn" || t == "1dcnn") return ModelKind::Cnn1d;
    if (t == "cnn2d" || t == "2d-cnn" || t == "2dcnn") return ModelKind::Cnn2d;
    if (t == "ecnn" || t == "tf-ecnn") return ModelKind::Ecnn;
    if (t == "hmm") return ModelKind::Hmm;
    throw ConfigError("unknown model '" + std::string(token) + "' (expected cnn1d, cnn2d, ecnn or hmm)");
}

// --- architectures -------------------------------------------------------------

nn::Shape cnn1d_input_shape(LengthPolicy variant) {
    switch (variant) {
        case LengthPolicy::Norm1000: return {static_cast<std::size_t>(kNormalizedBeatLength), 1};
        case LengthPolicy::ZeroPad1200: return {static_cast<std::size_t>(kZeroPadLength), 1};
        case LengthPolicy::Raw: break;
    }
    throw ConfigError("the 1D-CNN needs fixed-length beats (norm1000 or zpad1200)");
}

std::vector<nn::LayerSpec> cnn1d_specs(LengthPolicy variant) {
    using nn::LayerSpec;
    cnn1d_input_shape(variant);
    const double conv_drop = variant == LengthPolicy::ZeroPad1200 ? kConvDropout1dZeroPad : kConvDropout1d;
    return {
        LayerSpec::conv1d(6, 8), LayerSpec::batchnorm(), LayerSpec::relu(), LayerSpec::maxpool1d(2, 2),
        LayerSpec::conv1d(6, 8), LayerSpec::relu(), LayerSpec::maxpool1d(2, 2), LayerSpec::dropout(conv_drop),
        LayerSpec::conv1d(6, 8), LayerSpec::relu(), LayerSpec::maxpool1d(2, 2), LayerSpec::dropout(conv_drop),
        LayerSpec::flatten(),
        LayerSpec::dense(512), LayerSpec::relu(), LayerSpec::dropout(kDenseDropout),
        LayerSpec::dense(2), LayerSpec::softmax(),
    };
}

nn::Shape cnn2d_input_shape() {
    return {static_cast<std::size_t>(kMapFrames), static_cast<std::size_t>(kFeatureCoefficients), 1};
}

std::vector<nn::LayerSpec> cnn2d_specs() {
    using nn::LayerSpec;
    return {
        LayerSpec::conv2d(4, 16), LayerSpec::batchnorm(), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
        LayerSpec::conv2d(4, 16), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2), LayerSpec::dropout(kConvDropout2d),
        LayerSpec::conv2d(4, 16), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2), LayerSpec::dropout(kConvDropout2d),
        LayerSpec::flatten(),
        LayerSpec::dense(256), LayerSpec::relu(), LayerSpec::dropout(kDenseDropout),
        LayerSpec::dense(2), LayerSpec::softmax(),
    };
}

nn::Network<float> build_1dcnn(LengthPolicy variant, std::uint64_t seed) {
    return nn::Network<float>(cnn1d_input_shape(variant), cnn1d_specs(variant), seed);
}

nn::Network<float> build_2dcnn(std::uint64_t seed) {
    return nn::Network<float>(cnn2d_input_shape(), cnn2d_specs(), seed);
}

nn::Tensor<float> beats_to_tensor(std::span<const Beat> beats, std::size_t length) {
    nn::Tensor<float> t({beats.size(), length, 1});
    for (std::size_t b = 0; b < beats.size(); ++b) {
        if (beats[b].samples.size() != length) {
            throw ShapeError("beat " + std::to_string(b) + " has " + std::to_string(beats[b].samples.size()) +
                             " samples, the network expects " + std::to_string(length));
        }
        std::transform(beats[b].samples.begin(), beats[b].samples.end(), t.values.begin() + static_cast<std::ptrdiff_t>(b * length),
                       [](double v) { return static_cast<float>(v); });
    }
    return t;
}

nn::Tensor<float> maps_to_tensor(std::span<const FeatureMap> maps) {
    const auto frames = static_cast<std::size_t>(kMapFrames);
    const auto coeffs = static_cast<std::size_t>(kFeatureCoefficients);
    nn::Tensor<float> t({maps.size(), frames, coeffs, 1});
    for (std::size_t b = 0; b < maps.size(); ++b) {
        if (maps[b].frames != frames || maps[b].coefficients != coeffs) {
            throw ShapeError("feature map " + std::to_string(b) + " is " + std::to_string(maps[b].frames) + " x " +
                             std::to_string(maps[b].coefficients) + ", the network expects 96 x 12");
        }
        std::transform(maps[b].values.begin(), maps[b].values.end(), t.values.begin() + static_cast<std::ptrdiff_t>(b * frames * coeffs),
                       [](double v) { return static_cast<float>(v); });
    }
    return t;
}

// --- scores ----------------------------------------------------------------------

Label decide(double p_normal, double p_abnormal) { return p_normal > p_abnormal ? Label::Normal : Label::Abnormal; }

ClassScores fuse_scores(const ClassScores& a, const ClassScores& b) {
    ClassScores f;
    f.p_normal = a.p_normal + b.p_normal;
    f.p_abnormal = a.p_abnormal + b.p_abnormal;
    f.source = ModelKind::Ecnn;
    f.predicted = decide(f.p_normal, f.p_abnormal);
    return f;
}

ClassScores renormalized(const ClassScores& fused) {
    ClassScores r = fused;
    r.p_normal /= 2.0;
    r.p_abnormal /= 2.0;
    return r;
}

void ModelSet::validate() const {
    switch (kind) {
        case ModelKind::Cnn1d:
            if (!cnn1d) throw ValidationError("CNN1D model set has no 1D network");
            break;
        case ModelKind::Cnn2d:
            if (!cnn2d) throw ValidationError("CNN2D model set has no 2D network");
            break;
        case ModelKind::Ecnn:
            if (!cnn1d || !cnn2d) throw ValidationError("ECNN model set needs both networks");
            break;
        case ModelKind::Hmm:
            if (!hmm_normal || !hmm_abnormal) throw ValidationError("HMM model set needs both class models");
            if (hmm_normal->dim != hmm_abnormal->dim) throw ValidationError("HMM class models disagree on dimension");
            break;
    }
    if (needs_beats()) cnn1d_input_shape(beat_policy);
}

namespace {

std::vector<ClassScores> cnn_scores(nn::Network<float>& net, const nn::Tensor<float>& inputs, ModelKind source) {
    const auto p = nn::predict_proba(net, inputs);
    std::vector<ClassScores> out(inputs.shape[0]);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].p_normal = p.values[i * 2];
        out[i].p_abnormal = p.values[i * 2 + 1];
        out[i].source = source;
        out[i].predicted = decide(out[i].p_normal, out[i].p_abnormal);
    }
    return out;
}

}  // namespace

std::vector<ClassScores> predict_batch(ModelSet& models, std::span<const Beat> beats,
                                       std::span<const FeatureMap> features) {
    models.validate();
    if (models.needs_features() && features.size() != beats.size()) {
        throw ValidationError(std::string(to_string(models.kind)) + " needs one feature map per beat");
    }
    if (models.needs_beats()) {
        for (const auto& b : beats) {
            if (b.length_policy != models.beat_policy) {
                throw ValidationError("beat policy " + std::string(to_string(b.length_policy)) +
                                      " does not match the model's " + std::string(to_string(models.beat_policy)));
            }
        }
    }
    if (models.needs_features()) {
        for (const auto& f : features) {
            if (f.kind != models.features) {
                throw ValidationError("feature kind " + std::string(to_string(f.kind)) + " does not match the model's " +
                                      std::string(to_string(models.features)));
            }
        }
    }
    switch (models.kind) {
        case ModelKind::Cnn1d:
            return cnn_scores(*models.cnn1d, beats_to_tensor(beats, models.cnn1d->input_shape()[0]), ModelKind::Cnn1d);
        case ModelKind::Cnn2d: return cnn_scores(*models.cnn2d, maps_to_tensor(features), ModelKind::Cnn2d);
        case ModelKind::Ecnn: {
            const auto a = cnn_scores(*models.cnn1d, beats_to_tensor(beats, models.cnn1d->input_shape()[0]), ModelKind::Cnn1d);
            const auto b = cnn_scores(*models.cnn2d, maps_to_tensor(features), ModelKind::Cnn2d);
            std::vector<ClassScores> out(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) out[i] = fuse_scores(a[i], b[i]);
            return out;
        }
        case ModelKind::Hmm: {
            std::vector<ClassScores> out(features.size());
            for (std::size_t i = 0; i < features.size(); ++i) {
                const auto d = hmm::classify_hmm(*models.hmm_normal, *models.hmm_abnormal, features[i]);
                out[i].p_abnormal = hmm::abnormal_posterior(d.loglik_normal, d.loglik_abnormal);
                out[i].p_normal = 1.0 - out[i].p_abnormal;
                out[i].source = ModelKind::Hmm;
                out[i].predicted = d.label;
            }
            return out;
        }
    }
    return {};
}

ClassScores predict(ModelSet& models, const Beat& beat, const FeatureMap* features) {
    if (models.needs_features() && !features) {
        throw ValidationError(std::string(to_string(models.kind)) + " prediction needs a feature map");
    }
    std::span<const FeatureMap> maps;
    if (features && models.needs_features()) maps = std::span<const FeatureMap>(features, 1);
    return predict_batch(models, std::span<const Beat>(&beat, 1), maps).front();
}

// --- container ---------------------------------------------------------------------

namespace {

constexpr char kMagic[] = "PCGM";
enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

struct Block {
    std::string name;
    Dtype dtype = Dtype::F32;
    nn::Shape shape;
    std::vector<float> f32;
    std::vector<double> f64;
};

void write_block_header(ByteWriter& w, const std::string& name, Dtype dtype, const nn::Shape& shape) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
}

void add_network(std::vector<Block>& blocks, const std::string& prefix, const nn::Network<float>& net) {
    for (const auto& nt : net.named_tensors()) {
        Block b;
        b.name = prefix + nt.name;
        b.shape = nt.tensor->shape;
        b.f32 = nt.tensor->values;
        blocks.push_back(std::move(b));
    }
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].spec.kind != nn::LayerKind::BatchNorm) continue;
        Block b;
        b.name = prefix + "L" + std::to_string(i) + ".stat_updates";
        b.dtype = Dtype::F64;
        b.shape = {1};
        b.f64 = {static_cast<double>(layers[i].stat_updates)};
        blocks.push_back(std::move(b));
    }
}

void add_hmm(std::vector<Block>& blocks, const std::string& prefix, const hmm::HmmModel& m) {
    const auto n = static_cast<std::size_t>(m.n_states);
    auto push = [&](const std::string& name, nn::Shape shape, const std::vector<double>& v) {
        Block b;
        b.name = prefix + name;
        b.dtype = Dtype::F64;
        b.shape = std::move(shape);
        b.f64 = v;
        blocks.push_back(std::move(b));
    };
    push("transition", {n, n}, m.transition);
    push("initial", {n}, m.initial);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& g = m.emissions[j];
        const std::string s = "s" + std::to_string(j) + ".";
        push(s + "weights", {g.components()}, g.weights);
        push(s + "means", {g.components(), g.dim}, g.means);
        push(s + "variances", {g.components(), g.dim}, g.variances);
    }
}

std::map<std::string, Block> take_prefix(std::map<std::string, Block>& all, const std::string& prefix) {
    std::map<std::string, Block> out;
    for (auto it = all.begin(); it != all.end();) {
        if (it->first.rfind(prefix, 0) == 0) {
            out.emplace(it->first.substr(prefix.size()), std::move(it->second));
            it = all.erase(it);
        } else {
            ++it;
        }
    }
    return out;
}

void load_network(nn::Network<float>& net, std::map<std::string, Block> blocks, const std::string& what) {
    std::set<std::string> expected;
    for (const auto& nt : net.named_tensors()) expected.insert(nt.name);
    for (const auto& [name, b] : blocks) {
        if (b.dtype == Dtype::F32) {
            net.load_named(name, b.shape, b.f32);
            expected.erase(name);
        } else {
            const std::vector<float> v(b.f64.begin(), b.f64.end());
            net.load_named(name, b.shape, v);
        }
    }
    if (!expected.empty()) throw FormatError(what + " is missing parameter " + *expected.begin());
}

const Block& need(const std::map<std::string, Block>& blocks, const std::string& name, std::size_t rank) {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw FormatError("HMM block " + name + " missing");
    if (it->second.dtype != Dtype::F64 || it->second.shape.size() != rank) {
        throw FormatError("HMM block " + name + " has the wrong type or rank");
    }
    return it->second;
}

hmm::HmmModel load_hmm(const std::map<std::string, Block>& blocks, Label label) {
    hmm::HmmModel m;
    m.label = label;
    const Block& tr = need(blocks, "transition", 2);
    m.n_states = static_cast<int>(tr.shape[0]);
    m.transition = tr.f64;
    m.initial = need(blocks, "initial", 1).f64;
    for (int j = 0; j < m.n_states; ++j) {
        const std::string s = "s" + std::to_string(j) + ".";
        hmm::Gmm g;
        g.weights = need(blocks, s + "weights", 1).f64;
        const Block& means = need(blocks, s + "means", 2);
        g.dim = means.shape[1];
        g.means = means.f64;
        g.variances = need(blocks, s + "variances", 2).f64;
        m.dim = g.dim;
        m.emissions.push_back(std::move(g));
    }
    m.validate();
    return m;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelSet& models) {
    models.validate();
    std::map<std::string, std::string> meta = models.metadata;
    meta["kind"] = std::string(to_string(models.kind));
    meta["beat_policy"] = std::string(to_string(models.beat_policy));
    meta["features"] = std::string(to_string(models.features));

    std::vector<Block> blocks;
    if (models.cnn1d) add_network(blocks, "cnn1d.", *models.cnn1d);
    if (models.cnn2d) add_network(blocks, "cnn2d.", *models.cnn2d);
    if (models.hmm_normal) add_hmm(blocks, "hmm.normal.", *models.hmm_normal);
    if (models.hmm_abnormal) add_hmm(blocks, "hmm.abnormal.", *models.hmm_abnormal);

    ByteWriter w;
    w.raw(std::string_view(kMagic, 4));
    w.u16(kModelFormatVersion);
    w.u8(static_cast<std::uint8_t>(models.kind));
    w.u32(static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        w.u16(static_cast<std::uint16_t>(k.size()));
        w.raw(k);
        w.u32(static_cast<std::uint32_t>(v.size()));
        w.raw(v);
    }
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        write_block_header(w, b.name, b.dtype, b.shape);
        if (b.dtype == Dtype::F32) {
            for (float v : b.f32) w.f32(v);
        } else {
            for (double v : b.f64) w.f64(v);
        }
    }
    w.u32(crc32(w.bytes()));
    return std::move(w.bytes());
}

ModelSet decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "PCGM") {
        throw FormatError("not a model file (bad magic)");
    }
    if (bytes.size() < 10) throw IntegrityError("model file truncated");
    ByteReader header(bytes.subspan(4));
    const std::uint16_t version = header.u16();
    if (version != kModelFormatVersion) {
        throw VersionError("model format version " + std::to_string(version) + " is not supported (this build reads " +
                           std::to_string(kModelFormatVersion) + ")");
    }
    const auto body = bytes.subspan(0, bytes.size() - 4);
    ByteReader tail(bytes.subspan(bytes.size() - 4));
    if (tail.u32() != crc32(body)) throw IntegrityError("model file checksum mismatch (corrupt or truncated)");

    ByteReader r(body.subspan(6));
    const std::uint8_t kind_byte = r.u8();
    if (kind_byte < 1 || kind_byte > 4) throw FormatError("unknown model kind byte " + std::to_string(kind_byte));
    ModelSet m;
    m.kind = static_cast<ModelKind>(kind_byte);
    const std::uint32_t n_meta = r.u32();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string key = r.raw(r.u16());
        std::string value = r.raw(r.u32());
        m.metadata.emplace(std::move(key), std::move(value));
    }
    if (auto it = m.metadata.find("beat_policy"); it != m.metadata.end()) m.beat_policy = parse_length_policy(it->second);
    if (auto it = m.metadata.find("features"); it != m.metadata.end()) m.features = parse_feature_kind(it->second);

    std::map<std::string, Block> blocks;
    const std::uint32_t n_blocks = r.u32();
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        Block b;
        b.name = r.raw(r.u16());
        const std::uint8_t dt = r.u8();
        if (dt > 1) throw FormatError("block " + b.name + " has unknown dtype " + std::to_string(dt));
        b.dtype = static_cast<Dtype>(dt);
        const std::uint8_t rank = r.u8();
        for (std::uint8_t d = 0; d < rank; ++d) b.shape.push_back(r.u32());
        const std::size_t n = nn::shape_size(b.shape);
        if (n > r.remaining()) throw IntegrityError("block " + b.name + " runs past the end of the file");
        if (b.dtype == Dtype::F32) {
            b.f32.resize(n);
            for (auto& v : b.f32) v = r.f32();
        } else {
            b.f64.resize(n);
            for (auto& v : b.f64) v = r.f64();
        }
        blocks.emplace(b.name, std::move(b));
    }
    if (!r.at_end()) throw IntegrityError("trailing bytes after the parameter table");

    auto b1 = take_prefix(blocks, "cnn1d.");
    auto b2 = take_prefix(blocks, "cnn2d.");
    auto hn = take_prefix(blocks, "hmm.normal.");
    auto ha = take_prefix(blocks, "hmm.abnormal.");
    if (!blocks.empty()) throw FormatError("unexpected parameter block " + blocks.begin()->first);
    if (!b1.empty()) {
        m.cnn1d = build_1dcnn(m.beat_policy);
        load_network(*m.cnn1d, std::move(b1), "1D network");
    }
    if (!b2.empty()) {
        m.cnn2d = build_2dcnn();
        load_network(*m.cnn2d, std::move(b2), "2D network");
    }
    if (!hn.empty()) m.hmm_normal = load_hmm(hn, Label::Normal);
    if (!ha.empty()) m.hmm_abnormal = load_hmm(ha, Label::Abnormal);
    m.validate();
    return m;
}

void save_model(const std::string& path, const ModelSet& models) { write_file_atomic(path, encode_model(models)); }

ModelSet load_model(const std::string& path) { return decode_model(read_file_bytes(path)); }

}  // namespace pcg
