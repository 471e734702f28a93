#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcgcls/data_io.hpp"

namespace pcg {

enum class LengthPolicy : std::uint8_t { Raw = 0, Norm1000 = 1, ZeroPad1200 = 2 };

std::string_view to_string(LengthPolicy policy);
LengthPolicy parse_length_policy(std::string_view token);

/// One cardiac cycle. Norm1000 beats hold exactly 1000 samples, ZeroPad1200
/// beats exactly 1200; Raw beats keep the annotated span.
struct Beat {
    std::vector<double> samples;
    Label label = Label::Normal;
    std::string recording_id;
    int beat_index = 0;
    LengthPolicy length_policy = LengthPolicy::Raw;
    std::int64_t start_sample = 0;  // onset in the 1 kHz recording

    void validate() const;
};

inline constexpr int kNormalizedBeatLength = 1000;
inline constexpr int kZeroPadLength = 1200;

/// One Raw beat per complete cycle [S1 onset, next S1 onset). Leading and
/// trailing partial cycles, and cycles that run past the signal end, are
/// dropped.
std::vector<Beat> segment_beats(const Signal& signal, const StateSequence& states, Label label,
                                const std::string& recording_id = {});

/// Stretches or shrinks a Raw beat to `target_len` samples by linear
/// interpolation, output sample i taken at source position i * n / target_len.
/// Shrinking first applies the
/// anti-alias FIR at 0.45 of the new Nyquist.
Beat normalize_duration(const Beat& beat, int target_len = kNormalizedBeatLength);

/// Right-pads a Raw beat with zeros; returns nullopt (discard) when the beat is
/// longer than `max_len`.
std::optional<Beat> zero_pad(const Beat& beat, int max_len = kZeroPadLength);

/// Applies `policy` to a Raw beat (nullopt only for discarded zero-pad beats).
std::optional<Beat> apply_length_policy(const Beat& beat, LengthPolicy policy);

// Beat dump: per record u32 id length, id bytes, u32 beat_index, u8 label,
// u8 policy, u32 length, then float32 samples (all little-endian).
std::vector<std::uint8_t> encode_beats(std::span<const Beat> beats);
std::vector<Beat> decode_beats(std::span<const std::uint8_t> bytes);

}  // namespace pcg
