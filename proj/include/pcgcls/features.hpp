#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcgcls/segmentation.hpp"

namespace pcg {

enum class WindowKind : std::uint8_t { Hamming, Rectangular };

struct FrameConfig {
    int frame_len = 50;
    int hop = 10;
    WindowKind window = WindowKind::Hamming;

    void validate() const;
    /// floor((len - frame_len) / hop) + 1
    int frame_count(std::size_t signal_len) const;
};

std::vector<double> make_window(WindowKind kind, int length);

/// Windowed frames of `x`; errors when x is shorter than one frame.
std::vector<std::vector<double>> frame_signal(std::span<const double> x, const FrameConfig& cfg);
std::vector<std::vector<double>> frame_signal(const Beat& beat, const FrameConfig& cfg);

enum class FeatureKind : std::uint8_t { Mfcc = 0, Tvar = 1 };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view token);

/// Row-major T x D map: row t holds the coefficients of frame t.
struct FeatureMap {
    std::vector<double> values;
    std::size_t frames = 0;        // T
    std::size_t coefficients = 0;  // D
    FeatureKind kind = FeatureKind::Mfcc;

    double at(std::size_t t, std::size_t d) const { return values[t * coefficients + d]; }
    double& at(std::size_t t, std::size_t d) { return values[t * coefficients + d]; }
    std::span<const double> row(std::size_t t) const {
        return std::span<const double>(values).subspan(t * coefficients, coefficients);
    }
};

inline constexpr int kFeatureCoefficients = 12;
inline constexpr int kMapFrames = 96;

// --- MFCC ---------------------------------------------------------------------

struct MelFilterbank {
    int n_filters = 0;
    int n_fft = 0;
    int sample_rate_hz = 0;
    double low_hz = 0.0, high_hz = 0.0;
    std::vector<double> centers_hz;  // n_filters
    std::vector<double> weights;     // n_filters x (n_fft/2 + 1), row-major

    std::size_t n_bins() const { return static_cast<std::size_t>(n_fft / 2 + 1); }
    double weight(int filter, std::size_t bin) const {
        return weights[static_cast<std::size_t>(filter) * n_bins() + bin];
    }
    /// Filter energies of a one-sided power spectrum of n_bins() values.
    std::vector<double> apply(std::span<const double> power_spectrum) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// HTK-style triangles with centres equally spaced on the Mel scale between
/// low_hz and high_hz, evaluated at FFT bin frequencies.
MelFilterbank make_mel_filterbank(int n_filters = 26, int n_fft = 64, int sample_rate_hz = 1000,
                                  double low_hz = 25.0, double high_hz = 400.0);

/// |DFT|^2 of the zero-padded frame, bins 0..n_fft/2.
std::vector<double> power_spectrum(std::span<const double> frame, int n_fft);

/// Orthonormal DCT-II matrix (n x n, row k = basis k).
std::vector<double> dct2_matrix(int n);
std::vector<double> dct2(std::span<const double> x);
std::vector<double> dct2_transpose(std::span<const double> coeffs);

inline constexpr double kLogFloor = 1e-10;

struct MfccOptions {
    int n_coefficients = kFeatureCoefficients;
    bool include_c0 = false;  // when true keep c0..c11 instead of c1..c12
};

/// Frame -> power spectrum (n_fft = fb.n_fft) -> Mel energies -> log (floored)
/// -> orthonormal DCT-II -> c1..c12.
FeatureMap mfcc_map(std::span<const double> samples, const FrameConfig& cfg, const MelFilterbank& fb,
                    const MfccOptions& options = {});
/// Requires a NORM_1000 beat.
FeatureMap mfcc_map(const Beat& beat, const FrameConfig& cfg, const MelFilterbank& fb,
                    const MfccOptions& options = {});

// --- LPC / TVAR ------------------------------------------------------------------

struct LpcResult {
    std::vector<double> coefficients;  // a1..ap, x[n] ~ sum_k a_k x[n-k]
    std::vector<double> reflection;    // k1..kp
    std::vector<double> errors;        // residual energy after orders 0..p
    double residual_energy = 0.0;
};

/// Levinson-Durbin solution of the Toeplitz normal equations R a = r[1..p].
LpcResult levinson_durbin(std::span<const double> autocorr, int order);

/// Biased (1/N) autocorrelation r0..r_max_lag.
std::vector<double> autocorrelation(std::span<const double> x, int max_lag);

inline constexpr int kTvarOrder = 12;

/// Per frame: biased autocorrelation to lag 12, Levinson-Durbin, a1..a12.
/// An all-zero frame yields zero coefficients.
FeatureMap tvar_map(std::span<const double> samples, const FrameConfig& cfg, int order = kTvarOrder);
FeatureMap tvar_map(const Beat& beat, const FrameConfig& cfg, int order = kTvarOrder);

// Feature dump: per record u8 kind, u32 T, u32 D, u8 label, u32 id length,
// id bytes, then T*D float32 values (row-major, little-endian).
struct LabelledFeatureMap {
    FeatureMap map;
    Label label = Label::Normal;
    std::string id;
};
std::vector<std::uint8_t> encode_feature_maps(std::span<const LabelledFeatureMap> maps);
std::vector<LabelledFeatureMap> decode_feature_maps(std::span<const std::uint8_t> bytes);

}  // namespace pcg
