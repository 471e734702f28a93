#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcgcls/data_io.hpp"
#include "pcgcls/dsp.hpp"
#include "pcgcls/ensemble.hpp"
#include "pcgcls/features.hpp"
#include "pcgcls/metrics.hpp"
#include "pcgcls/segmentation.hpp"

namespace pcg {

// --- configuration -------------------------------------------------------------

/// Flat key=value pairs. Keys are lower-cased with '-' folded to '_'.
using ConfigValues = std::map<std::string, std::string>;

/// `key = value` lines with optional `[section]` headers (sections only group
/// keys; the key space is flat). `#` or `;` at line start or after whitespace
/// starts a comment.
ConfigValues parse_config_text(std::string_view text);
ConfigValues load_config_file(const std::string& path);
std::string normalize_key(std::string_view key);

/// Every recognised key with a one-line description, in display order.
struct ConfigKey {
    std::string name;
    std::string help;
};
const std::vector<ConfigKey>& config_keys();

enum class FeatureChoice : std::uint8_t { Raw, Mfcc, Tvar };
std::string_view to_string(FeatureChoice choice);
FeatureChoice parse_feature_choice(std::string_view token);

struct RunConfig {
    // data source: a dataset root, or synthetic parameters generated in memory
    std::string data_root;
    SynthConfig synth;
    double test_fraction = 0.2;

    ModelKind model = ModelKind::Ecnn;
    FeatureChoice features = FeatureChoice::Mfcc;
    LengthPolicy beat_policy = LengthPolicy::Norm1000;

    double learning_rate_1d = kLearningRate1d;
    double learning_rate_2d = kLearningRate2d;
    int batch_size = kBatchSize;
    int epochs = 50;
    int patience = 10;
    double val_fraction = 0.15;
    bool class_weighting = true;  // inverse class frequency

    int hmm_states = hmm::kDefaultStates;
    int hmm_components = hmm::kDefaultComponents;
    int hmm_max_iters = 50;
    double hmm_tol = 1e-5;

    std::string out_dir = ".";
    std::string model_file;  // defaults to <out_dir>/model.pcgm
    std::string wav;         // predict input
    std::string annotations;
    std::uint64_t seed = 1;

    /// Keys given explicitly (file or command line).
    std::set<std::string> explicit_keys;

    bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }
    bool uses_synth() const { return data_root.empty(); }
    std::string resolved_model_file() const;
    FeatureKind feature_kind() const;  // throws for Raw
    void validate() const;
};

/// Applies `values` over the defaults; unknown keys and malformed values are
/// ConfigErrors.
RunConfig make_run_config(const ConfigValues& values);

// --- data ---------------------------------------------------------------------

struct LoadedRecording {
    RecordingEntry entry;
    Split split = Split::Train;
    Signal signal{{0.0}, kTargetRateHz};
    StateSequence states;
};

struct LoadedData {
    std::vector<LoadedRecording> recordings;
    /// CRC32 over (id, split, label, subject) rows; independent of paths.
    std::uint32_t split_fingerprint = 0;
};

LoadedData load_data(const RunConfig& cfg);
std::uint32_t split_fingerprint(const DatasetManifest& manifest);

/// Model-ready samples, index-aligned: beats (after the length policy) and
/// feature maps (from duration-normalised beats).
struct Samples {
    std::vector<Beat> beats;
    std::vector<FeatureMap> maps;
    std::vector<std::string> subjects;

    std::size_t size() const { return beats.size(); }
};

/// Preprocess, segment and (optionally) extract features for `recordings`.
Samples extract_samples(const std::vector<LoadedRecording>& recordings, LengthPolicy policy,
                        std::optional<FeatureKind> features);

std::vector<LoadedRecording> in_split(const LoadedData& data, Split split);

// --- commands -------------------------------------------------------------------

/// Writes <id>.wav, <id>.states.csv, labels.csv, split.csv and manifest.txt.
void cmd_synth(const RunConfig& cfg, std::ostream& log);

struct TrainOutcome {
    ModelSet models;
    std::string history_csv;
    std::string report;
};

/// Trains without touching the filesystem beyond reading the data.
TrainOutcome train_models(const RunConfig& cfg, const LoadedData& data, std::ostream& log);
/// Writes model.pcgm (or model_file), history.csv and train_report.txt.
void cmd_train(const RunConfig& cfg, std::ostream& log);

struct EvaluationOutcome {
    EvalReport report;
    std::string text;
    std::string csv;  // header + one row
    std::vector<std::string> warnings;
};

EvaluationOutcome evaluate_models(const RunConfig& cfg, ModelSet& models, const LoadedData& data);
/// Writes eval_report.txt and eval.csv into out_dir and prints the report.
void cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// One row per beat: beat_index,p_normal,p_abnormal,label. Written to
/// <out>/predictions.csv when an output directory was given, else to `out`.
void cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// features.bin and features.csv for every recording.
void cmd_features(const RunConfig& cfg, std::ostream& log);
/// beats.bin and beats.csv for every recording.
void cmd_segment(const RunConfig& cfg, std::ostream& log);

/// Exit code for an exception escaping a command: 2 config, 3 data, 4 numeric.
int exit_code_for(const std::exception& e);

}  // namespace pcg
