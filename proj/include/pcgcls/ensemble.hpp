#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcgcls/features.hpp"
#include "pcgcls/hmm.hpp"
#include "pcgcls/nn.hpp"
#include "pcgcls/segmentation.hpp"

namespace pcg {

enum class ModelKind : std::uint8_t { Cnn1d = 1, Cnn2d = 2, Ecnn = 3, Hmm = 4 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view token);

inline constexpr double kLearningRate1d = 0.001031;
inline constexpr double kLearningRate2d = 0.000496;
inline constexpr int kBatchSize = 128;
inline constexpr double kConvDropout1d = 0.4;
inline constexpr double kConvDropout1dZeroPad = 0.8;
inline constexpr double kConvDropout2d = 0.5;
inline constexpr double kDenseDropout = 0.5;

nn::Shape cnn1d_input_shape(LengthPolicy variant);
std::vector<nn::LayerSpec> cnn1d_specs(LengthPolicy variant);
nn::Shape cnn2d_input_shape();
std::vector<nn::LayerSpec> cnn2d_specs();

/// Raw-beat network; `variant` is Norm1000 or ZeroPad1200.
nn::Network<float> build_1dcnn(LengthPolicy variant, std::uint64_t seed = 1);
/// 96 x 12 x 1 feature-map network.
nn::Network<float> build_2dcnn(std::uint64_t seed = 1);

/// Beats stacked as [B, L, 1]; every beat must have length `length`.
nn::Tensor<float> beats_to_tensor(std::span<const Beat> beats, std::size_t length);
/// Feature maps stacked as [B, 96, 12, 1].
nn::Tensor<float> maps_to_tensor(std::span<const FeatureMap> maps);

struct ClassScores {
    double p_normal = 0.0;
    double p_abnormal = 0.0;
    ModelKind source = ModelKind::Cnn1d;
    Label predicted = Label::Abnormal;
};

/// Label from a score pair; ties go to ABNORMAL.
Label decide(double p_normal, double p_abnormal);

/// Element-wise sum of two CNN score vectors (sums to 2); label is the argmax.
ClassScores fuse_scores(const ClassScores& a, const ClassScores& b);
/// The fused scores divided by two, for reporting.
ClassScores renormalized(const ClassScores& fused);

/// Trained classifier(s) plus the pipeline choices they were trained with.
struct ModelSet {
    ModelKind kind = ModelKind::Cnn1d;
    LengthPolicy beat_policy = LengthPolicy::Norm1000;
    FeatureKind features = FeatureKind::Mfcc;
    std::optional<nn::Network<float>> cnn1d;
    std::optional<nn::Network<float>> cnn2d;
    std::optional<hmm::HmmModel> hmm_normal;
    std::optional<hmm::HmmModel> hmm_abnormal;
    std::map<std::string, std::string> metadata;

    bool needs_beats() const { return kind == ModelKind::Cnn1d || kind == ModelKind::Ecnn; }
    bool needs_features() const { return kind != ModelKind::Cnn1d; }
    /// Throws when the members required by `kind` are missing.
    void validate() const;
};

/// INFER-mode scores for one beat. `features` is required for every kind but
/// CNN1D. ECNN returns the raw fused sum.
ClassScores predict(ModelSet& models, const Beat& beat, const FeatureMap* features);

/// Batched form of predict; `features` may be empty for CNN1D.
std::vector<ClassScores> predict_batch(ModelSet& models, std::span<const Beat> beats,
                                       std::span<const FeatureMap> features);

inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const ModelSet& models);
ModelSet decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const ModelSet& models);
ModelSet load_model(const std::string& path);

}  // namespace pcg
