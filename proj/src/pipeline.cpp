#include "pcgcls/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "pcgcls/binary_io.hpp"
#include "pcgcls/dsp.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/hmm.hpp"
#include "pcgcls/random.hpp"

namespace fs = std::filesystem;

namespace pcg {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& value) {
    const long long v = parse_integer(key, value);
    if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(key + ": value out of range");
    return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos == value.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
    const auto v = lower(value);
    if (v == "1" || v == "true" || v == "yes" || v == "on" || v == "inverse" || v == "auto") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off" || v == "none") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

// Re-raises a library error with the pipeline stage prefixed, keeping its category.
template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.category(), name + ": " + e.what());
    }
}

}  // namespace

// --- configuration -------------------------------------------------------------

std::string normalize_key(std::string_view key) {
    std::string k = lower(trim(key));
    while (!k.empty() && k.front() == '-') k.erase(k.begin());
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

ConfigValues parse_config_text(std::string_view text) {
    ConfigValues values;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        // a comment starts at '#' or ';' at line start or after whitespace
        for (std::size_t i = 0; i < line.size(); ++i) {
            if ((line[i] == '#' || line[i] == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
                line.resize(i);
                break;
            }
        }
        std::string s = trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("config line " + std::to_string(number) + ": unterminated section header");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        std::string key = normalize_key(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        if (values.count(key)) throw ConfigError("config line " + std::to_string(number) + ": duplicate key " + key);
        values[key] = value;
    }
    return values;
}

ConfigValues load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"seed", "master seed; split, init, dropout and synth seeds derive from it"},
        {"data_root", "dataset directory (labels.csv, <id>.wav, <id>.states.csv); empty = synthetic data in memory"},
        {"test_fraction", "fraction of each class held out for TEST when no split.csv exists"},
        {"n_recordings", "synthetic recordings in total (labels alternate)"},
        {"beats_per_recording", "synthetic complete cycles per recording"},
        {"heart_rate_bpm_lo", "synthetic heart-rate range, lower bound"},
        {"heart_rate_bpm_hi", "synthetic heart-rate range, upper bound"},
        {"murmur_amplitude", "synthetic systolic murmur amplitude for ABNORMAL recordings"},
        {"noise_std", "synthetic additive noise standard deviation"},
        {"sample_rate_hz", "synthetic recording sample rate"},
        {"recordings_per_subject", "synthetic recordings sharing one subject id"},
        {"model", "cnn1d, cnn2d, ecnn or hmm"},
        {"features", "raw, mfcc or tvar"},
        {"beat_policy", "norm1000 or zpad1200"},
        {"learning_rate", "Adam learning rate for every network (overrides the two below)"},
        {"learning_rate_1d", "Adam learning rate of the 1D-CNN"},
        {"learning_rate_2d", "Adam learning rate of the 2D-CNN"},
        {"batch_size", "mini-batch size"},
        {"epochs", "maximum training epochs"},
        {"patience", "early-stopping patience in epochs on validation MAcc (0 disables)"},
        {"val_fraction", "fraction of TRAIN recordings per class used for validation"},
        {"class_weighting", "inverse-frequency class weights in the loss (true/false)"},
        {"hmm_states", "HMM states"},
        {"hmm_components", "Gaussian components per HMM state"},
        {"hmm_max_iters", "maximum Baum-Welch iterations"},
        {"hmm_tol", "Baum-Welch relative log-likelihood tolerance"},
        {"out", "output directory"},
        {"model_file", "model container path (default <out>/model.pcgm)"},
        {"wav", "recording to classify (predict)"},
        {"annotations", "state annotation CSV of that recording (predict)"},
    };
    return keys;
}

std::string_view to_string(FeatureChoice choice) {
    switch (choice) {
        case FeatureChoice::Raw: return "raw";
        case FeatureChoice::Mfcc: return "mfcc";
        case FeatureChoice::Tvar: return "tvar";
    }
    return "?";
}

FeatureChoice parse_feature_choice(std::string_view token) {
    const auto t = lower(trim(token));
    if (t == "raw") return FeatureChoice::Raw;
    if (t == "mfcc") return FeatureChoice::Mfcc;
    if (t == "tvar") return FeatureChoice::Tvar;
    throw ConfigError("unknown features '" + std::string(token) + "' (expected raw, mfcc or tvar)");
}

std::string RunConfig::resolved_model_file() const {
    if (!model_file.empty()) return model_file;
    return (fs::path(out_dir) / "model.pcgm").string();
}

FeatureKind RunConfig::feature_kind() const {
    switch (features) {
        case FeatureChoice::Mfcc: return FeatureKind::Mfcc;
        case FeatureChoice::Tvar: return FeatureKind::Tvar;
        case FeatureChoice::Raw: break;
    }
    throw ConfigError("model " + std::string(to_string(model)) + " needs features mfcc or tvar, not raw");
}

void RunConfig::validate() const {
    synth.validate();
    if (!data_root.empty()) {
        for (const char* k : {"n_recordings", "beats_per_recording", "heart_rate_bpm_lo", "heart_rate_bpm_hi",
                              "murmur_amplitude", "noise_std", "sample_rate_hz", "recordings_per_subject"}) {
            if (is_set(k)) {
                throw ConfigError("both data_root and synthetic parameter " + std::string(k) +
                                  " are set; configure exactly one data source");
            }
        }
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
    if (model != ModelKind::Cnn1d) feature_kind();
    if (beat_policy == LengthPolicy::Raw) throw ConfigError("beat_policy must be norm1000 or zpad1200");
    if (!(learning_rate_1d > 0.0) || !(learning_rate_2d > 0.0)) throw ConfigError("learning rates must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (hmm_states < 1 || hmm_components < 1) throw ConfigError("hmm_states and hmm_components must be >= 1");
    if (hmm_max_iters < 0 || !(hmm_tol >= 0.0)) throw ConfigError("invalid Baum-Welch settings");
}

RunConfig make_run_config(const ConfigValues& values) {
    RunConfig c;
    std::set<std::string> known;
    for (const auto& k : config_keys()) known.insert(k.name);
    for (const auto& [raw_key, value] : values) {
        const std::string key = normalize_key(raw_key);
        if (!known.count(key)) throw ConfigError("unknown config key '" + raw_key + "'");
        c.explicit_keys.insert(key);
        if (key == "seed") c.seed = parse_u64(key, value);
        else if (key == "data_root") c.data_root = value;
        else if (key == "test_fraction") c.test_fraction = parse_real(key, value);
        else if (key == "n_recordings") c.synth.n_recordings = parse_int(key, value);
        else if (key == "beats_per_recording") c.synth.beats_per_recording = parse_int(key, value);
        else if (key == "heart_rate_bpm_lo") c.synth.heart_rate_bpm_lo = parse_real(key, value);
        else if (key == "heart_rate_bpm_hi") c.synth.heart_rate_bpm_hi = parse_real(key, value);
        else if (key == "murmur_amplitude") c.synth.murmur_amplitude = parse_real(key, value);
        else if (key == "noise_std") c.synth.noise_std = parse_real(key, value);
        else if (key == "sample_rate_hz") c.synth.sample_rate_hz = parse_int(key, value);
        else if (key == "recordings_per_subject") c.synth.recordings_per_subject = parse_int(key, value);
        else if (key == "model") c.model = parse_model_kind(value);
        else if (key == "features") c.features = parse_feature_choice(value);
        else if (key == "beat_policy") c.beat_policy = parse_length_policy(value);
        else if (key == "learning_rate") c.learning_rate_1d = c.learning_rate_2d = parse_real(key, value);
        else if (key == "learning_rate_1d") c.learning_rate_1d = parse_real(key, value);
        else if (key == "learning_rate_2d") c.learning_rate_2d = parse_real(key, value);
        else if (key == "batch_size") c.batch_size = parse_int(key, value);
        else if (key == "epochs") c.epochs = parse_int(key, value);
        else if (key == "patience") c.patience = parse_int(key, value);
        else if (key == "val_fraction") c.val_fraction = parse_real(key, value);
        else if (key == "class_weighting") c.class_weighting = parse_bool(key, value);
        else if (key == "hmm_states") c.hmm_states = parse_int(key, value);
        else if (key == "hmm_components") c.hmm_components = parse_int(key, value);
        else if (key == "hmm_max_iters") c.hmm_max_iters = parse_int(key, value);
        else if (key == "hmm_tol") c.hmm_tol = parse_real(key, value);
        else if (key == "out") c.out_dir = value;
        else if (key == "model_file") c.model_file = value;
        else if (key == "wav") c.wav = value;
        else if (key == "annotations") c.annotations = value;
    }
    // "learning_rate" wins over the per-network keys regardless of order.
    if (auto it = values.find("learning_rate"); it != values.end()) {
        c.learning_rate_1d = c.learning_rate_2d = parse_real("learning_rate", it->second);
    }
    c.synth.seed = derive_seed(c.seed, "synth");
    c.validate();
    return c;
}

// --- data ----------------------------------------------------------------------

std::uint32_t split_fingerprint(const DatasetManifest& manifest) {
    std::string text;
    for (const auto& e : manifest.entries()) {
        text += e.id + "\t" + std::string(to_string(manifest.split_of(e.id))) + "\t" +
                std::string(to_string(e.label)) + "\t" + e.subject_id + "\n";
    }
    return crc32(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

LoadedData load_data(const RunConfig& cfg) {
    LoadedData data;
    if (cfg.uses_synth()) {
        const auto recs = stage("synth", [&] { return synth_pcg(cfg.synth); });
        std::vector<SplitItem> items;
        std::vector<RecordingEntry> entries;
        for (const auto& r : recs) {
            items.push_back({r.id, r.subject_id, r.label});
            entries.push_back({r.id, {}, {}, r.label, r.subject_id});
        }
        auto split = assign_splits(items, derive_seed(cfg.seed, "split"), cfg.test_fraction);
        const DatasetManifest manifest(entries, split);
        data.split_fingerprint = split_fingerprint(manifest);
        for (const auto& r : recs) {
            data.recordings.push_back({entries[data.recordings.size()], manifest.split_of(r.id), r.signal, r.states});
        }
        return data;
    }
    const auto manifest = stage("manifest", [&] {
        return build_manifest(cfg.data_root, derive_seed(cfg.seed, "split"), cfg.test_fraction);
    });
    data.split_fingerprint = split_fingerprint(manifest);
    for (const auto& e : manifest.entries()) {
        LoadedRecording r{e, manifest.split_of(e.id), load_wav(e.wav_path), load_annotations(e.annotation_path)};
        data.recordings.push_back(std::move(r));
    }
    return data;
}

std::vector<LoadedRecording> in_split(const LoadedData& data, Split split) {
    std::vector<LoadedRecording> out;
    for (const auto& r : data.recordings) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

Samples extract_samples(const std::vector<LoadedRecording>& recordings, LengthPolicy policy,
                        std::optional<FeatureKind> features) {
    Samples s;
    const MelFilterbank fb = make_mel_filterbank();
    const FrameConfig frames;
    for (const auto& rec : recordings) {
        const auto& id = rec.entry.id;
        const Signal pre = stage("preprocess " + id, [&] { return preprocess(rec.signal); });
        const auto beats = stage("segment " + id, [&] {
            const auto states = rec.states.rescaled(rec.signal.sample_rate_hz(), kTargetRateHz);
            return segment_beats(pre, states, rec.entry.label, id);
        });
        for (const auto& raw : beats) {
            auto shaped = apply_length_policy(raw, policy);
            if (!shaped) continue;
            if (features) {
                const Beat norm = policy == LengthPolicy::Norm1000 ? *shaped : normalize_duration(raw);
                s.maps.push_back(stage("features " + id, [&] {
                    return *features == FeatureKind::Mfcc ? mfcc_map(norm, frames, fb) : tvar_map(norm, frames);
                }));
            }
            s.beats.push_back(std::move(*shaped));
            s.subjects.push_back(rec.entry.subject_id);
        }
    }
    return s;
}

// --- synth -----------------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
    const auto recs = stage("synth", [&] { return synth_pcg(cfg.synth); });
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    std::vector<LabelRow> rows;
    std::vector<SplitItem> items;
    for (const auto& r : recs) {
        save_wav((out / (r.id + ".wav")).string(), r.signal);
        save_annotations((out / (r.id + ".states.csv")).string(), r.states);
        rows.push_back({r.id, r.label, r.subject_id});
        items.push_back({r.id, r.subject_id, r.label});
    }
    write_text_atomic((out / "labels.csv").string(), format_label_index(rows));
    const auto split = assign_splits(items, derive_seed(cfg.seed, "split"), cfg.test_fraction);
    std::string split_csv = "id,split\n";
    for (const auto& r : recs) split_csv += r.id + "," + std::string(to_string(split.at(r.id))) + "\n";
    write_text_atomic((out / "split.csv").string(), split_csv);
    const auto manifest = build_manifest(out.string(), derive_seed(cfg.seed, "split"), cfg.test_fraction);
    save_manifest((out / "manifest.txt").string(), manifest);
    log << "synth: wrote " << recs.size() << " recordings to " << out.string() << "\n";
}

// --- train -----------------------------------------------------------------------

namespace {

struct Partition {
    std::vector<LoadedRecording> train, val;
};

// Stratified, seeded hold-out of whole recordings for validation.
Partition validation_partition(const std::vector<LoadedRecording>& recs, double fraction, std::uint64_t seed) {
    Partition p;
    if (fraction <= 0.0) {
        p.train = recs;
        return p;
    }
    Rng rng(seed);
    std::set<std::string> val_ids;
    for (Label label : {Label::Normal, Label::Abnormal}) {
        std::vector<std::string> ids;
        for (const auto& r : recs) {
            if (r.entry.label == label) ids.push_back(r.entry.id);
        }
        std::sort(ids.begin(), ids.end());
        shuffle(ids, rng);
        auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
        if (ids.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
        else n_val = 0;
        val_ids.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    }
    for (const auto& r : recs) (val_ids.count(r.entry.id) ? p.val : p.train).push_back(r);
    return p;
}

nn::ClassWeights class_weights(const std::vector<Beat>& beats, bool enabled) {
    nn::ClassWeights w;
    if (!enabled) return w;
    double n_normal = 0, n_abnormal = 0;
    for (const auto& b : beats) (b.label == Label::Normal ? n_normal : n_abnormal) += 1.0;
    const double n = n_normal + n_abnormal;
    if (n_normal > 0) w.normal = n / (2.0 * n_normal);
    if (n_abnormal > 0) w.abnormal = n / (2.0 * n_abnormal);
    return w;
}

std::vector<Label> labels_of(const std::vector<Beat>& beats) {
    std::vector<Label> y;
    for (const auto& b : beats) y.push_back(b.label);
    return y;
}

std::string history_rows(const std::string& member, const nn::TrainResult& r) {
    std::string s;
    for (const auto& e : r.history) {
        s += member + "," + std::to_string(e.epoch) + "," + fmt("%.6f", e.train_loss) + ",";
        if (e.has_validation) {
            s += fmt("%.6f", e.val_loss) + "," + fmt("%.2f", e.val_accuracy) + "," + fmt("%.2f", e.val_sensitivity) +
                 "," + fmt("%.2f", e.val_specificity) + "," + fmt("%.2f", e.val_macc);
        } else {
            s += ",,,,";
        }
        s += "\n";
    }
    return s;
}

}  // namespace

TrainOutcome train_models(const RunConfig& cfg, const LoadedData& data, std::ostream& log) {
    cfg.validate();
    TrainOutcome out;
    ModelSet& m = out.models;
    m.kind = cfg.model;
    m.beat_policy = m.needs_beats() ? cfg.beat_policy : LengthPolicy::Norm1000;
    if (m.needs_features()) m.features = cfg.feature_kind();
    const std::optional<FeatureKind> feats =
        m.needs_features() ? std::optional<FeatureKind>(m.features) : std::nullopt;

    const auto train_recs = in_split(data, Split::Train);
    if (train_recs.empty()) throw ValidationError("TRAIN split is empty");
    std::set<std::string> subjects;
    for (const auto& r : train_recs) subjects.insert(r.entry.subject_id);
    std::string subject_list;
    for (const auto& s : subjects) subject_list += (subject_list.empty() ? "" : ",") + s;

    m.metadata["seed"] = std::to_string(cfg.seed);
    m.metadata["split_fingerprint"] = hex32(data.split_fingerprint);
    m.metadata["train_subjects"] = subject_list;
    std::ostringstream report;
    report << "model: " << to_string(m.kind) << "\n";

    if (m.kind == ModelKind::Hmm) {
        const Samples s = extract_samples(train_recs, m.beat_policy, feats);
        report << "training beats: " << s.size() << "\n";
        std::string hist = "member,iteration,loglik\n";
        for (Label label : {Label::Normal, Label::Abnormal}) {
            std::vector<FeatureMap> maps;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s.beats[i].label == label) maps.push_back(s.maps[i]);
            }
            if (maps.empty()) throw ValidationError("TRAIN split has no " + std::string(to_string(label)) + " beats");
            const std::string name = "hmm_" + std::string(to_string(label));
            hmm::InitConfig ic;
            ic.n_states = cfg.hmm_states;
            ic.n_components = cfg.hmm_components;
            ic.seed = derive_seed(derive_seed(cfg.seed, "init"), name);
            const auto init = stage("hmm init", [&] { return hmm::init_hmm(maps, label, ic); });
            const auto bw = stage("baum-welch", [&] {
                return hmm::baum_welch(init, maps, {cfg.hmm_max_iters, cfg.hmm_tol});
            });
            for (const auto& ev : bw.events) log << name << ": " << ev << "\n";
            for (std::size_t i = 0; i < bw.loglik_history.size(); ++i) {
                hist += name + "," + std::to_string(i) + "," + fmt("%.6f", bw.loglik_history[i]) + "\n";
            }
            log << name << ": " << maps.size() << " sequences, " << bw.iterations << " iterations, loglik "
                << fmt("%.3f", bw.loglik_history.back()) << "\n";
            report << name << ": " << maps.size() << " sequences, " << bw.iterations << " iterations"
                   << (bw.converged ? " (converged)" : "") << ", final loglik " << fmt("%.6f", bw.loglik_history.back())
                   << "\n";
            (label == Label::Normal ? m.hmm_normal : m.hmm_abnormal) = bw.model;
        }
        out.history_csv = hist;
        out.report = report.str();
        return out;
    }

    const auto part = validation_partition(train_recs, cfg.val_fraction, derive_seed(cfg.seed, "val"));
    const Samples tr = extract_samples(part.train, m.beat_policy, feats);
    const Samples va = extract_samples(part.val, m.beat_policy, feats);
    if (tr.size() == 0) throw ValidationError("no training beats after segmentation");
    const auto weights = class_weights(tr.beats, cfg.class_weighting);
    report << "training beats: " << tr.size() << ", validation beats: " << va.size() << "\n";
    report << "class weights: normal " << fmt("%.6f", weights.normal) << ", abnormal " << fmt("%.6f", weights.abnormal)
           << "\n";
    std::string hist = "member,epoch,train_loss,val_loss,val_acc,val_sens,val_spec,val_macc\n";

    auto fit = [&](nn::Network<float>& net, nn::Tensor<float> xt, nn::Tensor<float> xv, double lr,
                   const std::string& name) {
        nn::Dataset<float> dt{std::move(xt), labels_of(tr.beats)};
        nn::Dataset<float> dv{std::move(xv), labels_of(va.beats)};
        nn::TrainConfig tc;
        tc.learning_rate = lr;
        tc.batch_size = cfg.batch_size;
        tc.epochs = cfg.epochs;
        tc.patience = cfg.patience;
        tc.class_weights = weights;
        tc.seed = derive_seed(derive_seed(cfg.seed, "dropout"), name);
        const auto res = stage("train " + name, [&] { return nn::train(net, dt, dv.size() ? &dv : nullptr, tc); });
        for (const auto& e : res.history) {
            log << name << " epoch " << e.epoch << ": loss " << fmt("%.4f", e.train_loss);
            if (e.has_validation) log << ", val macc " << fmt("%.2f", e.val_macc);
            log << "\n";
        }
        hist += history_rows(name, res);
        m.metadata["best_epoch_" + name] = std::to_string(res.best_epoch);
        report << name << ": " << res.history.size() << " epochs, best epoch " << res.best_epoch << "\n";
    };

    const std::uint64_t init = derive_seed(cfg.seed, "init");
    if (m.kind == ModelKind::Cnn1d || m.kind == ModelKind::Ecnn) {
        m.cnn1d = build_1dcnn(m.beat_policy, derive_seed(init, "cnn1d"));
        const std::size_t len = m.cnn1d->input_shape()[0];
        fit(*m.cnn1d, beats_to_tensor(tr.beats, len), beats_to_tensor(va.beats, len), cfg.learning_rate_1d, "cnn1d");
    }
    if (m.kind == ModelKind::Cnn2d || m.kind == ModelKind::Ecnn) {
        m.cnn2d = build_2dcnn(derive_seed(init, "cnn2d"));
        fit(*m.cnn2d, maps_to_tensor(tr.maps), maps_to_tensor(va.maps), cfg.learning_rate_2d, "cnn2d");
    }
    out.history_csv = hist;
    out.report = report.str();
    return out;
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto data = load_data(cfg);
    const auto outcome = train_models(cfg, data, log);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    save_model(cfg.resolved_model_file(), outcome.models);
    write_text_atomic((out / "history.csv").string(), outcome.history_csv);
    write_text_atomic((out / "train_report.txt").string(), outcome.report);
    log << "train: model written to " << cfg.resolved_model_file() << "\n";
}

// --- evaluate ----------------------------------------------------------------------

namespace {

void check_compatible(const RunConfig& cfg, const ModelSet& m) {
    if (cfg.is_set("model") && cfg.model != m.kind) {
        throw ConfigError("configured model " + std::string(to_string(cfg.model)) + " does not match the model file (" +
                          std::string(to_string(m.kind)) + ")");
    }
    if (cfg.is_set("features") && m.needs_features() &&
        (cfg.features == FeatureChoice::Raw || cfg.feature_kind() != m.features)) {
        throw ConfigError("configured features " + std::string(to_string(cfg.features)) +
                          " do not match the model file (" + std::string(to_string(m.features)) + ")");
    }
    if (cfg.is_set("beat_policy") && m.needs_beats() && cfg.beat_policy != m.beat_policy) {
        throw ConfigError("configured beat policy " + std::string(to_string(cfg.beat_policy)) +
                          " does not match the model file (" + std::string(to_string(m.beat_policy)) + ")");
    }
}

std::string feature_label(const ModelSet& m) {
    const std::string raw = "raw-" + std::string(to_string(m.beat_policy));
    switch (m.kind) {
        case ModelKind::Cnn1d: return raw;
        case ModelKind::Ecnn: return raw + "+" + std::string(to_string(m.features));
        default: return std::string(to_string(m.features));
    }
}

}  // namespace

EvaluationOutcome evaluate_models(const RunConfig& cfg, ModelSet& models, const LoadedData& data) {
    check_compatible(cfg, models);
    EvaluationOutcome out;
    const auto test = in_split(data, Split::Test);
    if (test.empty()) throw ValidationError("TEST split is empty");

    if (auto it = models.metadata.find("split_fingerprint");
        it != models.metadata.end() && it->second != hex32(data.split_fingerprint)) {
        out.warnings.push_back("dataset split differs from the one the model was trained on (fingerprint " +
                               it->second + " vs " + hex32(data.split_fingerprint) + ")");
    }
    if (auto it = models.metadata.find("train_subjects"); it != models.metadata.end()) {
        std::set<std::string> trained;
        std::stringstream ss(it->second);
        for (std::string s; std::getline(ss, s, ',');) trained.insert(s);
        std::set<std::string> overlap;
        for (const auto& r : test) {
            if (trained.count(r.entry.subject_id)) overlap.insert(r.entry.subject_id);
        }
        if (!overlap.empty()) {
            out.warnings.push_back("split leakage: " + std::to_string(overlap.size()) +
                                   " TEST subject(s) were seen in training, e.g. " + *overlap.begin());
        }
    }

    const auto feats = models.needs_features() ? std::optional<FeatureKind>(models.features) : std::nullopt;
    const Samples s = extract_samples(test, models.beat_policy, feats);
    if (s.size() == 0) throw ValidationError("no TEST beats after segmentation");
    const auto scores = stage("predict", [&] { return predict_batch(models, s.beats, s.maps); });
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < scores.size(); ++i) preds.push_back({s.beats[i].label, scores[i].predicted});
    out.report = evaluate(preds);
    const std::string classifier(to_string(models.kind));
    const std::string features = feature_label(models);
    out.text = format_report_text(out.report, classifier, features);
    out.csv = std::string(kReportCsvHeader) + "\n" + format_report_csv_row(out.report, classifier, features) + "\n";
    return out;
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    auto models = stage("load model", [&] { return load_model(cfg.resolved_model_file()); });
    check_compatible(cfg, models);
    const auto data = load_data(cfg);
    const auto res = evaluate_models(cfg, models, data);
    for (const auto& w : res.warnings) log << "warning: " << w << "\n";
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_text_atomic((dir / "eval_report.txt").string(), res.text);
    write_text_atomic((dir / "eval.csv").string(), res.csv);
    out << res.text;
}

// --- predict / features / segment --------------------------------------------------

void cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    if (cfg.wav.empty() || cfg.annotations.empty()) throw ConfigError("predict needs --wav and --annotations");
    auto models = stage("load model", [&] { return load_model(cfg.resolved_model_file()); });
    check_compatible(cfg, models);
    LoadedRecording rec;
    rec.entry.id = fs::path(cfg.wav).stem().string();
    rec.entry.label = Label::Normal;
    rec.signal = stage("read wav", [&] { return load_wav(cfg.wav); });
    rec.states = stage("read annotations", [&] { return load_annotations(cfg.annotations); });
    const auto feats = models.needs_features() ? std::optional<FeatureKind>(models.features) : std::nullopt;
    const Samples s = extract_samples({rec}, models.beat_policy, feats);
    std::vector<ClassScores> scores;
    if (s.size() > 0) scores = stage("predict", [&] { return predict_batch(models, s.beats, s.maps); });
    std::string csv = "beat_index,p_normal,p_abnormal,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto sc = models.kind == ModelKind::Ecnn ? renormalized(scores[i]) : scores[i];
        csv += std::to_string(s.beats[i].beat_index) + "," + fmt("%.6f", sc.p_normal) + "," +
               fmt("%.6f", sc.p_abnormal) + "," + std::string(to_string(sc.predicted)) + "\n";
    }
    if (cfg.is_set("out")) {
        fs::create_directories(cfg.out_dir);
        const auto path = (fs::path(cfg.out_dir) / "predictions.csv").string();
        write_text_atomic(path, csv);
        log << "predict: " << scores.size() << " beats written to " << path << "\n";
    } else {
        out << csv;
    }
}

void cmd_features(const RunConfig& cfg, std::ostream& log) {
    const FeatureKind kind = cfg.feature_kind();
    const auto data = load_data(cfg);
    std::vector<LabelledFeatureMap> maps;
    std::string csv = "recording_id,beat_index,label,split,frames,coefficients\n";
    for (const auto& rec : data.recordings) {
        const Samples s = extract_samples({rec}, LengthPolicy::Norm1000, kind);
        for (std::size_t i = 0; i < s.size(); ++i) {
            maps.push_back({s.maps[i], s.beats[i].label, rec.entry.id});
            csv += rec.entry.id + "," + std::to_string(s.beats[i].beat_index) + "," +
                   std::string(to_string(s.beats[i].label)) + "," + std::string(to_string(rec.split)) + "," +
                   std::to_string(s.maps[i].frames) + "," + std::to_string(s.maps[i].coefficients) + "\n";
        }
    }
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_file_atomic((out / "features.bin").string(), encode_feature_maps(maps));
    write_text_atomic((out / "features.csv").string(), csv);
    log << "features: " << maps.size() << " " << to_string(kind) << " maps written to " << out.string() << "\n";
}

void cmd_segment(const RunConfig& cfg, std::ostream& log) {
    const auto data = load_data(cfg);
    std::vector<Beat> beats;
    std::string csv = "recording_id,beat_index,label,split,start_sample,length\n";
    for (const auto& rec : data.recordings) {
        const Samples s = extract_samples({rec}, cfg.beat_policy, std::nullopt);
        for (const auto& b : s.beats) {
            csv += rec.entry.id + "," + std::to_string(b.beat_index) + "," + std::string(to_string(b.label)) + "," +
                   std::string(to_string(rec.split)) + "," + std::to_string(b.start_sample) + "," +
                   std::to_string(b.samples.size()) + "\n";
            beats.push_back(b);
        }
    }
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_file_atomic((out / "beats.bin").string(), encode_beats(beats));
    write_text_atomic((out / "beats.csv").string(), csv);
    log << "segment: " << beats.size() << " beats (" << to_string(cfg.beat_policy) << ") written to " << out.string()
        << "\n";
}

int exit_code_for(const std::exception& e) {
    if (const auto* pe = dynamic_cast<const Error*>(&e)) {
        switch (pe->category()) {
            case ErrorCategory::Config: return 2;
            case ErrorCategory::Data: return 3;
            case ErrorCategory::Numeric: return 4;
        }
    }
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
    return 1;
}

}  // namespace pcg
