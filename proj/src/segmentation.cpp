#include "pcgcls/segmentation.hpp"

#include <algorithm>

#include "pcgcls/binary_io.hpp"
#include "pcgcls/dsp.hpp"
#include "pcgcls/error.hpp"

namespace pcg {

std::string_view to_string(LengthPolicy policy) {
    switch (policy) {
        case LengthPolicy::Raw: return "raw";
        case LengthPolicy::Norm1000: return "norm1000";
        case LengthPolicy::ZeroPad1200: return "zpad1200";
    }
    return "?";
}

LengthPolicy parse_length_policy(std::string_view token) {
    if (token == "raw") return LengthPolicy::Raw;
    if (token == "norm1000") return LengthPolicy::Norm1000;
    if (token == "zpad1200") return LengthPolicy::ZeroPad1200;
    throw ConfigError("unknown beat policy '" + std::string(token) + "' (expected norm1000 or zpad1200)");
}

void Beat::validate() const {
    if (length_policy == LengthPolicy::Norm1000 && samples.size() != kNormalizedBeatLength) {
        throw ValidationError("NORM_1000 beat must have 1000 samples");
    }
    if (length_policy == LengthPolicy::ZeroPad1200 && samples.size() != kZeroPadLength) {
        throw ValidationError("ZPAD_1200 beat must have 1200 samples");
    }
}

std::vector<Beat> segment_beats(const Signal& signal, const StateSequence& states, Label label,
                                const std::string& recording_id) {
    std::vector<std::int64_t> s1_onsets;
    for (const auto& e : states.entries()) {
        if (e.state == HeartState::S1) s1_onsets.push_back(e.start_sample);
    }
    std::vector<Beat> beats;
    const auto n = static_cast<std::int64_t>(signal.size());
    // Cycle invariants of StateSequence guarantee SYSTOLE, S2 and DIASTOLE sit
    // between two consecutive S1 onsets.
    for (std::size_t i = 0; i + 1 < s1_onsets.size(); ++i) {
        const auto begin = s1_onsets[i];
        const auto end = s1_onsets[i + 1];
        if (end > n) break;
        Beat b;
        b.samples.assign(signal.samples().begin() + begin, signal.samples().begin() + end);
        b.label = label;
        b.recording_id = recording_id;
        b.beat_index = static_cast<int>(beats.size());
        b.length_policy = LengthPolicy::Raw;
        b.start_sample = begin;
        beats.push_back(std::move(b));
    }
    return beats;
}

Beat normalize_duration(const Beat& beat, int target_len) {
    if (beat.length_policy != LengthPolicy::Raw) throw ValidationError("normalize_duration expects a RAW beat");
    if (beat.samples.size() < 2) throw ValidationError("cannot normalize a beat shorter than 2 samples");
    if (target_len < 2) throw ValidationError("target length must be at least 2");

    Beat out = beat;
    out.length_policy = target_len == kNormalizedBeatLength ? LengthPolicy::Norm1000 : LengthPolicy::Raw;
    const auto src_len = beat.samples.size();
    const auto dst_len = static_cast<std::size_t>(target_len);
    if (src_len == dst_len) return out;

    std::vector<double> source = beat.samples;
    if (src_len > dst_len) {
        const double cutoff = kAntiAliasCutoffFraction * 0.5 * static_cast<double>(dst_len) / src_len;
        source = fir_filter_centered(source, design_lowpass_fir(cutoff, kAntiAliasTaps));
    }
    // Output sample i sits at source position i * src/dst; positions past the
    // last sample continue the final segment.
    std::vector<double> positions(dst_len);
    const double step = static_cast<double>(src_len) / static_cast<double>(dst_len);
    for (std::size_t i = 0; i < dst_len; ++i) positions[i] = static_cast<double>(i) * step;
    out.samples = interpolate_linear(source, positions);
    const double last = static_cast<double>(src_len - 1);
    const double slope = source[src_len - 1] - source[src_len - 2];
    for (std::size_t i = 0; i < dst_len; ++i) {
        if (positions[i] > last) out.samples[i] = source[src_len - 1] + (positions[i] - last) * slope;
    }
    return out;
}

std::optional<Beat> zero_pad(const Beat& beat, int max_len) {
    if (beat.length_policy != LengthPolicy::Raw) throw ValidationError("zero_pad expects a RAW beat");
    if (beat.samples.size() > static_cast<std::size_t>(max_len)) return std::nullopt;
    Beat out = beat;
    out.samples.resize(static_cast<std::size_t>(max_len), 0.0);
    out.length_policy = max_len == kZeroPadLength ? LengthPolicy::ZeroPad1200 : LengthPolicy::Raw;
    return out;
}

std::optional<Beat> apply_length_policy(const Beat& beat, LengthPolicy policy) {
    switch (policy) {
        case LengthPolicy::Raw: return beat;
        case LengthPolicy::Norm1000: return normalize_duration(beat);
        case LengthPolicy::ZeroPad1200: return zero_pad(beat);
    }
    return std::nullopt;
}

std::vector<std::uint8_t> encode_beats(std::span<const Beat> beats) {
    ByteWriter w;
    for (const auto& b : beats) {
        w.u32(static_cast<std::uint32_t>(b.recording_id.size()));
        w.raw(b.recording_id);
        w.u32(static_cast<std::uint32_t>(b.beat_index));
        w.u8(static_cast<std::uint8_t>(b.label));
        w.u8(static_cast<std::uint8_t>(b.length_policy));
        w.u32(static_cast<std::uint32_t>(b.samples.size()));
        for (double v : b.samples) w.f32(static_cast<float>(v));
    }
    return std::move(w.bytes());
}

std::vector<Beat> decode_beats(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::vector<Beat> beats;
    while (!r.at_end()) {
        Beat b;
        b.recording_id = r.raw(r.u32());
        b.beat_index = static_cast<int>(r.u32());
        const auto label = r.u8();
        const auto policy = r.u8();
        if (label > 1 || policy > 2) throw FormatError("beat dump: invalid label or policy byte");
        b.label = static_cast<Label>(label);
        b.length_policy = static_cast<LengthPolicy>(policy);
        const auto n = r.u32();
        if (static_cast<std::size_t>(n) * 4 > r.remaining()) throw IntegrityError("beat dump truncated");
        b.samples.resize(n);
        for (auto& v : b.samples) v = r.f32();
        beats.push_back(std::move(b));
    }
    return beats;
}

}  // namespace pcg
