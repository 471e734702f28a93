#pragma once

#include <complex>
#include <span>
#include <vector>

#include "pcgcls/data_io.hpp"

namespace pcg {

struct FilterSpec {
    int order = 4;  // overall band-pass order, even
    double low_cut_hz = 25.0;
    double high_cut_hz = 400.0;
    int sample_rate_hz = 1000;

    void validate() const;
};

/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
    double b0, b1, b2;
    double a1, a2;

    std::complex<double> response(double freq_hz, double sample_rate_hz) const;
    bool stable() const;
};

struct BiquadChain {
    std::vector<Biquad> sections;

    std::complex<double> response(double freq_hz, double sample_rate_hz) const;
    double magnitude(double freq_hz, double sample_rate_hz) const {
        return std::abs(response(freq_hz, sample_rate_hz));
    }
    bool stable() const;
};

/// Digital Butterworth band-pass: analog low-pass prototype of order/2 poles,
/// low-pass to band-pass transform, bilinear transform with both edges
/// pre-warped. Each section carries one zero at z = 1 and one at z = -1 and is
/// scaled to unit gain at the band centre.
BiquadChain design_butterworth_bandpass(const FilterSpec& spec);

/// Forward then time-reversed pass through the chain (zero net phase). Edges
/// are handled with odd extension of `min_filtfilt_length(chain)` samples and
/// steady-state initial conditions.
Signal filter_zero_phase(const Signal& signal, const BiquadChain& chain);
std::vector<double> filter_zero_phase(std::span<const double> x, const BiquadChain& chain);
std::size_t min_filtfilt_length(const BiquadChain& chain);

/// Causal single pass with zero initial state.
std::vector<double> filter_causal(std::span<const double> x, const BiquadChain& chain);

/// Hamming-windowed sinc low-pass, taps normalised to unit DC gain.
/// `cutoff` is in cycles per sample (0, 0.5).
std::vector<double> design_lowpass_fir(double cutoff, int taps = 31);

/// Centred (zero-delay) FIR convolution with edge-sample replication.
std::vector<double> fir_filter_centered(std::span<const double> x, std::span<const double> taps);

/// Linear interpolation of x at fractional positions (clamped to the ends).
std::vector<double> interpolate_linear(std::span<const double> x, std::span<const double> positions);

inline constexpr int kAntiAliasTaps = 31;
inline constexpr double kAntiAliasCutoffFraction = 0.45;  // of the target Nyquist

/// Downsampling only: anti-alias FIR then linear interpolation at
/// i * source/target. Output length round(n * target/source).
Signal resample(const Signal& signal, int target_rate_hz);

/// Zero mean, unit population standard deviation.
Signal standardize(const Signal& signal);
std::vector<double> standardize(std::span<const double> x);

inline constexpr int kTargetRateHz = 1000;

/// resample(1000) -> zero-phase 25-400 Hz Butterworth (order 4) -> standardize.
Signal preprocess(const Signal& signal);

}  // namespace pcg
