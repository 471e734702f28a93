#include "pcgcls/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "pcgcls/error.hpp"

namespace pcg {

namespace {
constexpr double kPi = std::numbers::pi;
using cplx = std::complex<double>;
}  // namespace

void FilterSpec::validate() const {
    if (order <= 0 || order % 2 != 0) {
        throw DesignError("band-pass order must be a positive even integer, got " + std::to_string(order));
    }
    if (sample_rate_hz <= 0) throw DesignError("sample rate must be positive");
    const double nyquist = sample_rate_hz / 2.0;
    if (!(low_cut_hz > 0.0 && low_cut_hz < high_cut_hz && high_cut_hz < nyquist)) {
        throw DesignError("cutoffs must satisfy 0 < low < high < fs/2 (got " +
                          std::to_string(low_cut_hz) + ", " + std::to_string(high_cut_hz) +
                          ", fs/2 = " + std::to_string(nyquist) + ")");
    }
}

std::complex<double> Biquad::response(double freq_hz, double sample_rate_hz) const {
    const cplx zinv = std::polar(1.0, -2.0 * kPi * freq_hz / sample_rate_hz);
    const cplx zinv2 = zinv * zinv;
    return (b0 + b1 * zinv + b2 * zinv2) / (1.0 + a1 * zinv + a2 * zinv2);
}

bool Biquad::stable() const {
    // Schur-Cohn conditions for z^2 + a1 z + a2.
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

std::complex<double> BiquadChain::response(double freq_hz, double sample_rate_hz) const {
    cplx h = 1.0;
    for (const auto& s : sections) h *= s.response(freq_hz, sample_rate_hz);
    return h;
}

bool BiquadChain::stable() const {
    return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) { return s.stable(); });
}

BiquadChain design_butterworth_bandpass(const FilterSpec& spec) {
    spec.validate();
    const int n = spec.order / 2;
    const double fs = spec.sample_rate_hz;
    const double w_lo = 2.0 * fs * std::tan(kPi * spec.low_cut_hz / fs);
    const double w_hi = 2.0 * fs * std::tan(kPi * spec.high_cut_hz / fs);
    const double bw = w_hi - w_lo;
    const double w0_sq = w_lo * w_hi;

    std::vector<cplx> poles;
    for (int k = 0; k < n; ++k) {
        const cplx p = std::polar(1.0, kPi * (2.0 * k + n + 1) / (2.0 * n));
        const cplx a = p * bw / 2.0;
        const cplx root = std::sqrt(a * a - w0_sq);
        for (const cplx s : {a + root, a - root}) {
            poles.push_back((2.0 * fs + s) / (2.0 * fs - s));
        }
    }

    // Group into conjugate pairs; leftover real poles pair with each other.
    constexpr double kImagTol = 1e-12;
    std::vector<std::pair<cplx, cplx>> pairs;
    std::vector<double> reals;
    for (const auto& z : poles) {
        if (z.imag() > kImagTol) {
            pairs.emplace_back(z, std::conj(z));
        } else if (std::abs(z.imag()) <= kImagTol) {
            reals.push_back(z.real());
        }
    }
    std::sort(reals.begin(), reals.end());
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
    if (pairs.size() != static_cast<std::size_t>(n)) {
        throw DesignError("pole pairing failed for order " + std::to_string(spec.order));
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& l, const auto& r) { return std::abs(l.first) < std::abs(r.first); });

    const double f_center = fs / kPi * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
    BiquadChain chain;
    for (const auto& [z1, z2] : pairs) {
        Biquad s{1.0, 0.0, -1.0, -(z1 + z2).real(), (z1 * z2).real()};
        const double g = 1.0 / std::abs(s.response(f_center, fs));
        s.b0 *= g;
        s.b2 *= g;
        chain.sections.push_back(s);
    }
    if (!chain.stable()) throw DesignError("designed filter is unstable");
    return chain;
}

namespace {

struct SectionState {
    double z1 = 0.0, z2 = 0.0;
};

// Transposed direct form II over the whole chain, in place.
void run_chain(std::vector<double>& x, const BiquadChain& chain, std::vector<SectionState> state) {
    for (std::size_t k = 0; k < chain.sections.size(); ++k) {
        const Biquad& s = chain.sections[k];
        double z1 = state[k].z1, z2 = state[k].z2;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

// Per-section state for a unit step held forever, scaled by the DC gain of
// the preceding sections.
std::vector<SectionState> steady_state(const BiquadChain& chain, double level) {
    std::vector<SectionState> st;
    double scale = level;
    for (const auto& s : chain.sections) {
        const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        SectionState z;
        z.z2 = scale * (s.b2 - s.a2 * gain);
        z.z1 = scale * (s.b1 - s.a1 * gain) + z.z2;
        st.push_back(z);
        scale *= gain;
    }
    return st;
}

}  // namespace

std::size_t min_filtfilt_length(const BiquadChain& chain) {
    return 3 * (2 * chain.sections.size() + 1) + 1;
}

std::vector<double> filter_causal(std::span<const double> x, const BiquadChain& chain) {
    std::vector<double> y(x.begin(), x.end());
    run_chain(y, chain, std::vector<SectionState>(chain.sections.size()));
    return y;
}

std::vector<double> filter_zero_phase(std::span<const double> x, const BiquadChain& chain) {
    const std::size_t min_len = min_filtfilt_length(chain);
    if (x.size() < min_len) {
        throw ValidationError("signal too short for zero-phase filtering: need at least " +
                              std::to_string(min_len) + " samples, got " + std::to_string(x.size()));
    }
    const std::size_t pad = min_len - 1;
    const std::size_t n = x.size();
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    run_chain(ext, chain, steady_state(chain, ext.front()));
    std::reverse(ext.begin(), ext.end());
    run_chain(ext, chain, steady_state(chain, ext.front()));
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Signal filter_zero_phase(const Signal& signal, const BiquadChain& chain) {
    return Signal(filter_zero_phase(signal.samples(), chain), signal.sample_rate_hz());
}

std::vector<double> design_lowpass_fir(double cutoff, int taps) {
    if (!(cutoff > 0.0 && cutoff < 0.5)) throw DesignError("FIR cutoff must lie in (0, 0.5) cycles/sample");
    if (taps < 1 || taps % 2 == 0) throw DesignError("FIR tap count must be odd");
    std::vector<double> h(static_cast<std::size_t>(taps));
    const int mid = taps / 2;
    for (int i = 0; i < taps; ++i) {
        const int k = i - mid;
        const double sinc = k == 0 ? 2.0 * cutoff : std::sin(2.0 * kPi * cutoff * k) / (kPi * k);
        const double window = taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * kPi * i / (taps - 1));
        h[static_cast<std::size_t>(i)] = sinc * window;
    }
    const double sum = std::accumulate(h.begin(), h.end(), 0.0);
    for (auto& v : h) v /= sum;
    return h;
}

std::vector<double> fir_filter_centered(std::span<const double> x, std::span<const double> taps) {
    const auto n = static_cast<long>(x.size());
    const auto mid = static_cast<long>(taps.size() / 2);
    std::vector<double> y(x.size(), 0.0);
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long k = 0; k < static_cast<long>(taps.size()); ++k) {
            const long j = std::clamp(i + mid - k, 0L, n - 1);
            acc += taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
        }
        y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
}

std::vector<double> interpolate_linear(std::span<const double> x, std::span<const double> positions) {
    std::vector<double> y(positions.size());
    const double last = static_cast<double>(x.size() - 1);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double p = std::clamp(positions[i], 0.0, last);
        const auto lo = static_cast<std::size_t>(std::floor(p));
        const std::size_t hi = std::min(lo + 1, x.size() - 1);
        const double frac = p - static_cast<double>(lo);
        y[i] = frac == 0.0 ? x[lo] : x[lo] + frac * (x[hi] - x[lo]);
    }
    return y;
}

Signal resample(const Signal& signal, int target_rate_hz) {
    const int source = signal.sample_rate_hz();
    if (target_rate_hz <= 0) throw ValidationError("target rate must be positive");
    if (target_rate_hz > source) {
        throw UnsupportedFormatError("upsampling from " + std::to_string(source) + " Hz to " +
                                     std::to_string(target_rate_hz) + " Hz is not supported");
    }
    if (target_rate_hz == source) return signal;

    const double ratio = static_cast<double>(source) / target_rate_hz;
    const auto taps = design_lowpass_fir(kAntiAliasCutoffFraction * 0.5 / ratio, kAntiAliasTaps);
    const auto smoothed = fir_filter_centered(signal.samples(), taps);

    const auto out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(signal.size()) * target_rate_hz / source));
    if (out_len == 0) throw ValidationError("resampled signal would be empty");
    std::vector<double> positions(out_len);
    for (std::size_t i = 0; i < out_len; ++i) positions[i] = static_cast<double>(i) * ratio;
    return Signal(interpolate_linear(smoothed, positions), target_rate_hz);
}

std::vector<double> standardize(std::span<const double> x) {
    if (x.size() < 2) throw DegenerateSignalError("standardization needs at least 2 samples");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0) || sd < 1e-300) throw DegenerateSignalError("signal has zero variance");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / sd;
    return y;
}

Signal standardize(const Signal& signal) {
    return Signal(standardize(std::span<const double>(signal.samples())), signal.sample_rate_hz());
}

Signal preprocess(const Signal& signal) {
    if (signal.sample_rate_hz() < kTargetRateHz) {
        throw UnsupportedFormatError("recording rate " + std::to_string(signal.sample_rate_hz()) +
                                     " Hz is below the 1000 Hz processing rate");
    }
    static const BiquadChain chain = design_butterworth_bandpass(FilterSpec{});
    return standardize(filter_zero_phase(resample(signal, kTargetRateHz), chain));
}

}  // namespace pcg
