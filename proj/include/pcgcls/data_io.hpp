#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pcg {

enum class Label : std::uint8_t { Normal = 0, Abnormal = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view token);

/// Sampled waveform. Construction validates: non-empty, positive rate,
/// finite samples.
class Signal {
public:
    Signal(std::vector<double> samples, int sample_rate_hz);

    const std::vector<double>& samples() const { return samples_; }
    int sample_rate_hz() const { return sample_rate_hz_; }
    std::size_t size() const { return samples_.size(); }
    double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

private:
    std::vector<double> samples_;
    int sample_rate_hz_;
};

enum class HeartState : std::uint8_t { S1 = 0, Systole = 1, S2 = 2, Diastole = 3 };

std::string_view to_string(HeartState state);
HeartState parse_heart_state(std::string_view token);
inline HeartState next_state(HeartState s) {
    return static_cast<HeartState>((static_cast<int>(s) + 1) % 4);
}

struct StateEntry {
    std::int64_t start_sample;
    HeartState state;

    friend bool operator==(const StateEntry&, const StateEntry&) = default;
};

/// Annotated cardiac state onsets. Starts are strictly increasing and states
/// follow S1 -> SYSTOLE -> S2 -> DIASTOLE -> S1; the sequence may begin or end
/// mid-cycle.
class StateSequence {
public:
    StateSequence() = default;
    explicit StateSequence(std::vector<StateEntry> entries);

    const std::vector<StateEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Maps onsets annotated at `from_rate` onto a `to_rate` time base.
    StateSequence rescaled(int from_rate, int to_rate) const;

    friend bool operator==(const StateSequence&, const StateSequence&) = default;

private:
    std::vector<StateEntry> entries_;
};

// --- WAV -----------------------------------------------------------------

/// Reads RIFF/WAVE PCM 16-bit mono; samples are pcm / 32768.
Signal load_wav(const std::string& path);
Signal decode_wav(std::span<const std::uint8_t> bytes);

/// 16-bit PCM encoding with round-to-nearest and saturation.
std::vector<std::uint8_t> encode_wav(const Signal& signal);
void save_wav(const std::string& path, const Signal& signal);

// --- annotations -----------------------------------------------------------

StateSequence parse_annotations(std::string_view csv_text);
StateSequence load_annotations(const std::string& path);
std::string format_annotations(const StateSequence& states);
void save_annotations(const std::string& path, const StateSequence& states);

// --- dataset manifest -------------------------------------------------------

enum class Split : std::uint8_t { Train = 0, Test = 1 };
std::string_view to_string(Split split);
Split parse_split(std::string_view token);

struct RecordingEntry {
    std::string id;
    std::string wav_path;
    std::string annotation_path;
    Label label;
    std::string subject_id;
};

struct LabelRow {
    std::string id;
    Label label;
    std::string subject_id;
};

/// `id,label,subject_id`; an empty subject falls back to the id. Labels accept
/// normal/abnormal (any case) or the challenge's -1/1 coding.
std::vector<LabelRow> parse_label_index(std::string_view csv_text);
std::string format_label_index(std::span<const LabelRow> rows);

class DatasetManifest {
public:
    DatasetManifest() = default;
    /// Validates that every entry has exactly one split and that no subject
    /// appears in both splits.
    DatasetManifest(std::vector<RecordingEntry> entries, std::map<std::string, Split> split);

    const std::vector<RecordingEntry>& entries() const { return entries_; }
    const std::map<std::string, Split>& split_assignment() const { return split_; }
    Split split_of(const std::string& id) const;
    std::vector<RecordingEntry> entries_in(Split split) const;

private:
    std::vector<RecordingEntry> entries_;
    std::map<std::string, Split> split_;
};

struct SplitItem {
    std::string id;
    std::string subject_id;
    Label label;
};

/// Subject-grouped split. Subjects are visited in seeded random order and each
/// goes to TEST when that moves the per-class TEST counts closer to
/// round(test_fraction * class_count); otherwise TRAIN.
std::map<std::string, Split> assign_splits(std::span<const SplitItem> items,
                                           std::uint64_t split_seed, double test_fraction);

/// Scans `root_dir` for `labels.csv`, `<id>.wav` and `<id>.states.csv`. When a
/// `split.csv` (`id,split`) exists it is used verbatim instead of the seeded
/// assignment.
DatasetManifest build_manifest(const std::string& root_dir, std::uint64_t split_seed,
                               double test_fraction);

/// One tab-separated line per entry: id, split, label, subject, wav, annotation.
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);
void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

/// CRC32 of the canonical manifest text; ties trained models to their split.
std::uint32_t manifest_hash(const DatasetManifest& manifest);

// --- synthetic data -------------------------------------------------------

struct SynthConfig {
    int n_recordings = 120;  // total; labels alternate NORMAL, ABNORMAL
    int beats_per_recording = 8;
    double heart_rate_bpm_lo = 70.0;
    double heart_rate_bpm_hi = 80.0;
    double murmur_amplitude = 0.5;
    double noise_std = 0.05;
    int sample_rate_hz = 2000;
    int recordings_per_subject = 2;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthRecording {
    std::string id;
    std::string subject_id;
    Label label;
    Signal signal;
    StateSequence states;
    /// Sample index of each complete cycle's S1 onset plus the closing onset.
    std::vector<std::int64_t> cycle_boundaries;
};

// Burst and murmur design of the generator.
inline constexpr double kSynthS1CenterHz = 40.0;
inline constexpr double kSynthS2CenterHz = 60.0;
inline constexpr double kSynthMurmurLoHz = 100.0;
inline constexpr double kSynthMurmurHiHz = 300.0;

/// Synthetic PCG: Gaussian-windowed tone bursts for S1/S2, a band-limited
/// systolic murmur for ABNORMAL, additive white noise. Each recording opens
/// with a partial diastole and closes with a partial S1+systole so that
/// segmentation has incomplete cycles to drop.
std::vector<SynthRecording> synth_pcg(const SynthConfig& config);

}  // namespace pcg
