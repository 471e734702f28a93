#include "pcgcls/features.hpp"

#include <cmath>
#include <numbers>

#include "pcgcls/binary_io.hpp"
#include "pcgcls/error.hpp"

namespace pcg {

namespace {
constexpr double kPi = std::numbers::pi;
}

void FrameConfig::validate() const {
    if (frame_len <= 0) throw ConfigError("frame_len must be positive");
    if (hop <= 0 || hop > frame_len) throw ConfigError("hop must satisfy 0 < hop <= frame_len");
}

int FrameConfig::frame_count(std::size_t signal_len) const {
    if (signal_len < static_cast<std::size_t>(frame_len)) return 0;
    return static_cast<int>((signal_len - static_cast<std::size_t>(frame_len)) / static_cast<std::size_t>(hop)) + 1;
}

std::vector<double> make_window(WindowKind kind, int length) {
    std::vector<double> w(static_cast<std::size_t>(length), 1.0);
    if (kind == WindowKind::Hamming && length > 1) {
        for (int n = 0; n < length; ++n) {
            w[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / (length - 1));
        }
    }
    return w;
}

std::vector<std::vector<double>> frame_signal(std::span<const double> x, const FrameConfig& cfg) {
    cfg.validate();
    if (x.size() < static_cast<std::size_t>(cfg.frame_len)) {
        throw ValidationError("signal of " + std::to_string(x.size()) + " samples is shorter than one frame (" +
                              std::to_string(cfg.frame_len) + ")");
    }
    const auto window = make_window(cfg.window, cfg.frame_len);
    const int count = cfg.frame_count(x.size());
    std::vector<std::vector<double>> frames(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
        auto& f = frames[static_cast<std::size_t>(t)];
        f.resize(static_cast<std::size_t>(cfg.frame_len));
        const auto offset = static_cast<std::size_t>(t) * static_cast<std::size_t>(cfg.hop);
        for (std::size_t n = 0; n < f.size(); ++n) f[n] = x[offset + n] * window[n];
    }
    return frames;
}

std::vector<std::vector<double>> frame_signal(const Beat& beat, const FrameConfig& cfg) {
    return frame_signal(std::span<const double>(beat.samples), cfg);
}

std::string_view to_string(FeatureKind kind) { return kind == FeatureKind::Mfcc ? "mfcc" : "tvar"; }

FeatureKind parse_feature_kind(std::string_view token) {
    if (token == "mfcc") return FeatureKind::Mfcc;
    if (token == "tvar") return FeatureKind::Tvar;
    throw ConfigError("unknown feature kind '" + std::string(token) + "'");
}

// --- MFCC ----------------------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(int n_filters, int n_fft, int sample_rate_hz, double low_hz, double high_hz) {
    if (n_filters < 1) throw ConfigError("filterbank needs at least one filter");
    if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw ConfigError("n_fft must be a power of two");
    if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= sample_rate_hz / 2.0)) {
        throw ConfigError("filterbank band must satisfy 0 <= low < high <= fs/2");
    }
    MelFilterbank fb;
    fb.n_filters = n_filters;
    fb.n_fft = n_fft;
    fb.sample_rate_hz = sample_rate_hz;
    fb.low_hz = low_hz;
    fb.high_hz = high_hz;

    const double mel_lo = hz_to_mel(low_hz), mel_hi = hz_to_mel(high_hz);
    std::vector<double> edges(static_cast<std::size_t>(n_filters + 2));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_filters + 1));
    }
    fb.centers_hz.assign(edges.begin() + 1, edges.end() - 1);

    const std::size_t bins = fb.n_bins();
    fb.weights.assign(static_cast<std::size_t>(n_filters) * bins, 0.0);
    for (int m = 0; m < n_filters; ++m) {
        const double left = edges[static_cast<std::size_t>(m)];
        const double center = edges[static_cast<std::size_t>(m) + 1];
        const double right = edges[static_cast<std::size_t>(m) + 2];
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
            double w = 0.0;
            if (f > left && f <= center) w = (f - left) / (center - left);
            else if (f > center && f < right) w = (right - f) / (right - center);
            fb.weights[static_cast<std::size_t>(m) * bins + k] = w;
            any = any || w > 0.0;
        }
        if (!any) {
            throw ConfigError("Mel filter " + std::to_string(m) + " covers no FFT bin; use fewer filters or a larger n_fft");
        }
    }
    return fb;
}

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
    if (power.size() != n_bins()) throw ShapeError("power spectrum length does not match the filterbank");
    std::vector<double> e(static_cast<std::size_t>(n_filters), 0.0);
    for (int m = 0; m < n_filters; ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < power.size(); ++k) acc += weight(m, k) * power[k];
        e[static_cast<std::size_t>(m)] = acc;
    }
    return e;
}

std::vector<double> power_spectrum(std::span<const double> frame, int n_fft) {
    if (frame.size() > static_cast<std::size_t>(n_fft)) throw ShapeError("frame longer than n_fft");
    // n_fft is tiny (64): a direct real DFT over a cached twiddle table.
    static thread_local int table_n = 0;
    static thread_local std::vector<double> cos_table, sin_table;
    const auto nfft = static_cast<std::size_t>(n_fft);
    if (table_n != n_fft) {
        cos_table.resize(nfft);
        sin_table.resize(nfft);
        for (std::size_t i = 0; i < nfft; ++i) {
            cos_table[i] = std::cos(2.0 * kPi * static_cast<double>(i) / n_fft);
            sin_table[i] = -std::sin(2.0 * kPi * static_cast<double>(i) / n_fft);
        }
        table_n = n_fft;
    }
    const std::size_t bins = nfft / 2 + 1;
    std::vector<double> p(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < frame.size(); ++n) {
            const std::size_t idx = (k * n) % nfft;
            re += frame[n] * cos_table[idx];
            im += frame[n] * sin_table[idx];
        }
        p[k] = re * re + im * im;
    }
    return p;
}

std::vector<double> dct2_matrix(int n) {
    std::vector<double> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int i = 0; i < n; ++i) {
            m[static_cast<std::size_t>(k * n + i)] = scale * std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
        }
    }
    return m;
}

std::vector<double> dct2(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    const auto m = dct2_matrix(n);
    std::vector<double> c(x.size(), 0.0);
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += m[static_cast<std::size_t>(k * n + i)] * x[static_cast<std::size_t>(i)];
        c[static_cast<std::size_t>(k)] = acc;
    }
    return c;
}

std::vector<double> dct2_transpose(std::span<const double> coeffs) {
    const int n = static_cast<int>(coeffs.size());
    const auto m = dct2_matrix(n);
    std::vector<double> x(coeffs.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += m[static_cast<std::size_t>(k * n + i)] * coeffs[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = acc;
    }
    return x;
}

FeatureMap mfcc_map(std::span<const double> samples, const FrameConfig& cfg, const MelFilterbank& fb,
                    const MfccOptions& options) {
    if (cfg.frame_len > fb.n_fft) throw ConfigError("frame_len exceeds the filterbank's n_fft");
    const int first = options.include_c0 ? 0 : 1;
    if (options.n_coefficients < 1 || first + options.n_coefficients > fb.n_filters) {
        throw ConfigError("requested MFCC count exceeds the number of Mel filters");
    }
    const auto frames = frame_signal(samples, cfg);
    const auto dct = dct2_matrix(fb.n_filters);
    const auto nf = static_cast<std::size_t>(fb.n_filters);

    FeatureMap map;
    map.kind = FeatureKind::Mfcc;
    map.frames = frames.size();
    map.coefficients = static_cast<std::size_t>(options.n_coefficients);
    map.values.assign(map.frames * map.coefficients, 0.0);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        auto energies = fb.apply(power_spectrum(frames[t], fb.n_fft));
        for (auto& e : energies) e = std::log(std::max(e, kLogFloor));
        for (std::size_t c = 0; c < map.coefficients; ++c) {
            const std::size_t k = c + static_cast<std::size_t>(first);
            double acc = 0.0;
            for (std::size_t i = 0; i < nf; ++i) acc += dct[k * nf + i] * energies[i];
            map.at(t, c) = acc;
        }
    }
    return map;
}

FeatureMap mfcc_map(const Beat& beat, const FrameConfig& cfg, const MelFilterbank& fb, const MfccOptions& options) {
    if (beat.length_policy != LengthPolicy::Norm1000) throw ValidationError("MFCC maps require NORM_1000 beats");
    return mfcc_map(std::span<const double>(beat.samples), cfg, fb, options);
}

// --- LPC -----------------------------------------------------------------------

LpcResult levinson_durbin(std::span<const double> r, int order) {
    if (order < 0) throw ValidationError("LPC order must be non-negative");
    if (r.size() < static_cast<std::size_t>(order) + 1) {
        throw ValidationError("autocorrelation needs " + std::to_string(order + 1) + " lags");
    }
    if (!(r[0] > 0.0)) throw ValidationError("autocorrelation r0 must be positive");

    LpcResult res;
    const auto p = static_cast<std::size_t>(order);
    std::vector<double> a(p + 1, 0.0), prev(p + 1, 0.0);
    double err = r[0];
    res.errors.push_back(err);
    for (std::size_t i = 1; i <= p; ++i) {
        double acc = r[i];
        for (std::size_t j = 1; j < i; ++j) acc -= a[j] * r[i - j];
        const double k = acc / err;
        if (!std::isfinite(k) || std::abs(k) >= 1.0) {
            throw NumericError("autocorrelation is not positive definite (|k" + std::to_string(i) +
                               "| = " + std::to_string(std::abs(k)) + ")");
        }
        prev = a;
        a[i] = k;
        for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] - k * prev[i - j];
        err *= (1.0 - k * k);
        res.reflection.push_back(k);
        res.errors.push_back(err);
    }
    res.coefficients.assign(a.begin() + 1, a.end());
    res.residual_energy = err;
    return res;
}

std::vector<double> autocorrelation(std::span<const double> x, int max_lag) {
    const std::size_t n = x.size();
    std::vector<double> r(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (std::size_t lag = 0; lag < r.size() && lag < n; ++lag) {
        double acc = 0.0;
        for (std::size_t i = lag; i < n; ++i) acc += x[i] * x[i - lag];
        r[lag] = acc / static_cast<double>(n);
    }
    return r;
}

FeatureMap tvar_map(std::span<const double> samples, const FrameConfig& cfg, int order) {
    const auto frames = frame_signal(samples, cfg);
    FeatureMap map;
    map.kind = FeatureKind::Tvar;
    map.frames = frames.size();
    map.coefficients = static_cast<std::size_t>(order);
    map.values.assign(map.frames * map.coefficients, 0.0);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto r = autocorrelation(frames[t], order);
        if (!(r[0] > 0.0)) continue;  // silent frame: coefficients stay 0
        const auto lpc = levinson_durbin(r, order);
        for (std::size_t c = 0; c < map.coefficients; ++c) map.at(t, c) = lpc.coefficients[c];
    }
    return map;
}

FeatureMap tvar_map(const Beat& beat, const FrameConfig& cfg, int order) {
    if (beat.length_policy != LengthPolicy::Norm1000) throw ValidationError("TVAR maps require NORM_1000 beats");
    return tvar_map(std::span<const double>(beat.samples), cfg, order);
}

std::vector<std::uint8_t> encode_feature_maps(std::span<const LabelledFeatureMap> maps) {
    ByteWriter w;
    for (const auto& m : maps) {
        w.u8(static_cast<std::uint8_t>(m.map.kind));
        w.u32(static_cast<std::uint32_t>(m.map.frames));
        w.u32(static_cast<std::uint32_t>(m.map.coefficients));
        w.u8(static_cast<std::uint8_t>(m.label));
        w.u32(static_cast<std::uint32_t>(m.id.size()));
        w.raw(m.id);
        for (double v : m.map.values) w.f32(static_cast<float>(v));
    }
    return std::move(w.bytes());
}

std::vector<LabelledFeatureMap> decode_feature_maps(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::vector<LabelledFeatureMap> out;
    while (!r.at_end()) {
        LabelledFeatureMap m;
        const auto kind = r.u8();
        if (kind > 1) throw FormatError("feature dump: invalid kind byte");
        m.map.kind = static_cast<FeatureKind>(kind);
        m.map.frames = r.u32();
        m.map.coefficients = r.u32();
        const auto label = r.u8();
        if (label > 1) throw FormatError("feature dump: invalid label byte");
        m.label = static_cast<Label>(label);
        m.id = r.raw(r.u32());
        const std::size_t n = m.map.frames * m.map.coefficients;
        if (n * 4 > r.remaining()) throw IntegrityError("feature dump truncated");
        m.map.values.resize(n);
        for (auto& v : m.map.values) v = r.f32();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace pcg
