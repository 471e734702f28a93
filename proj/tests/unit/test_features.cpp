#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "reference.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/features.hpp"
#include "pcgcls/random.hpp"

using namespace pcg;
using reference::reference_autocorr;
using reference::toeplitz_solve;

namespace {

constexpr double kPi = std::numbers::pi;

Beat norm_beat(std::vector<double> samples) {
    Beat b;
    b.samples = std::move(samples);
    b.length_policy = LengthPolicy::Norm1000;
    return b;
}

std::vector<double> noise(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> x(n);
    for (double& v : x) v = scale * standard_normal(rng);
    return x;
}

// --- independent MFCC reference -------------------------------------------------

double mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double inv_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

std::vector<std::vector<double>> reference_filters(int n_filters, int n_fft, double fs, double lo, double hi) {
    std::vector<double> edges(static_cast<std::size_t>(n_filters + 2));
    for (int i = 0; i < n_filters + 2; ++i) edges[i] = inv_mel(mel(lo) + (mel(hi) - mel(lo)) * i / (n_filters + 1));
    std::vector<std::vector<double>> w(static_cast<std::size_t>(n_filters), std::vector<double>(static_cast<std::size_t>(n_fft / 2 + 1)));
    for (int m = 0; m < n_filters; ++m) {
        for (int k = 0; k <= n_fft / 2; ++k) {
            const double f = k * fs / n_fft;
            const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
            double v = 0.0;
            if (f > l && f <= c) v = (f - l) / (c - l);
            else if (f > c && f < r) v = (r - f) / (r - c);
            w[m][k] = v;
        }
    }
    return w;
}

std::vector<double> reference_power(const std::vector<double>& frame, int n_fft) {
    std::vector<double> p(static_cast<std::size_t>(n_fft / 2 + 1));
    for (int k = 0; k <= n_fft / 2; ++k) {
        double re = 0, im = 0;
        for (std::size_t n = 0; n < frame.size(); ++n) {
            re += frame[n] * std::cos(2 * kPi * k * static_cast<double>(n) / n_fft);
            im -= frame[n] * std::sin(2 * kPi * k * static_cast<double>(n) / n_fft);
        }
        p[k] = re * re + im * im;
    }
    return p;
}

double reference_dct(const std::vector<double>& x, int k) {
    const double n = static_cast<double>(x.size());
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * std::cos(kPi * k * (static_cast<double>(i) + 0.5) / n);
    return acc * (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
}

// T x 12 coefficients c1..c12.
std::vector<double> reference_mfcc(const std::vector<double>& x) {
    const auto filters = reference_filters(26, 64, 1000, 25, 400);
    std::vector<double> out;
    for (std::size_t start = 0; start + 50 <= x.size(); start += 10) {
        std::vector<double> frame(50);
        for (int n = 0; n < 50; ++n) frame[n] = x[start + n] * (0.54 - 0.46 * std::cos(2 * kPi * n / 49.0));
        const auto p = reference_power(frame, 64);
        std::vector<double> loge(26);
        for (int m = 0; m < 26; ++m) {
            double e = 0;
            for (std::size_t k = 0; k < p.size(); ++k) e += filters[m][k] * p[k];
            loge[m] = std::log(std::max(e, 1e-10));
        }
        for (int k = 1; k <= 12; ++k) out.push_back(reference_dct(loge, k));
    }
    return out;
}

}  // namespace

TEST_CASE("framing: 1000 samples, frame 50, hop 10 give 96 frames") {
    const FrameConfig cfg;
    CHECK(cfg.frame_count(1000) == 96);
    CHECK(frame_signal(std::vector<double>(1000, 1.0), cfg).size() == 96);
}

TEST_CASE("framing: hop equal to frame length tiles without overlap") {
    const FrameConfig cfg{50, 50, WindowKind::Rectangular};
    CHECK(cfg.frame_count(1000) == 20);
    CHECK(cfg.frame_count(1049) == 20);
    std::vector<double> x(1000);
    std::iota(x.begin(), x.end(), 0.0);
    const auto frames = frame_signal(x, cfg);
    CHECK(frames[3][0] == 150.0);
    CHECK(frames[3][49] == 199.0);
}

TEST_CASE("framing: constant signal with rectangular window gives identical frames") {
    const auto frames = frame_signal(std::vector<double>(1000, 0.3), FrameConfig{50, 10, WindowKind::Rectangular});
    for (const auto& f : frames) CHECK(f == frames.front());
    CHECK(frames.front().front() == 0.3);
}

TEST_CASE("framing: hamming window and invalid configs") {
    const auto w = make_window(WindowKind::Hamming, 50);
    CHECK(w[0] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(w[49] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(w[24] == doctest::Approx(0.54 - 0.46 * std::cos(2 * kPi * 24 / 49.0)).epsilon(1e-12));
    CHECK_THROWS(frame_signal(std::vector<double>(10, 1.0), FrameConfig{}));
    CHECK_THROWS(FrameConfig({0, 10}).validate());
    CHECK_THROWS(FrameConfig({50, 0}).validate());
}

TEST_CASE("mel: HTK scale and filterbank weights match the reference triangles") {
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(mel_to_hz(hz_to_mel(123.4)) == doctest::Approx(123.4).epsilon(1e-12));
    const auto fb = make_mel_filterbank();
    const auto ref = reference_filters(26, 64, 1000, 25, 400);
    REQUIRE(fb.n_filters == 26);
    REQUIRE(fb.n_bins() == 33);
    for (int m = 0; m < 26; ++m) {
        CHECK(fb.centers_hz[m] == doctest::Approx(inv_mel(mel(25) + (mel(400) - mel(25)) * (m + 1) / 27.0)).epsilon(1e-12));
        for (std::size_t k = 0; k < 33; ++k) REQUIRE(std::abs(fb.weight(m, k) - ref[m][k]) < 1e-12);
    }
}

TEST_CASE("mel: filter weights cover every bin inside the band") {
    const auto fb = make_mel_filterbank();
    for (std::size_t k = 0; k < fb.n_bins(); ++k) {
        const double f = k * 1000.0 / 64.0;
        if (f < 25.0 || f > 400.0) continue;
        double sum = 0;
        for (int m = 0; m < fb.n_filters; ++m) sum += fb.weight(m, k);
        CHECK(sum > 0.1);
    }
}

TEST_CASE("mel: a tone at a filter centre excites that filter most") {
    // One sample per bin of a 1024-point grid so every centre is resolved.
    const int n_fft = 1024;
    const auto fb = make_mel_filterbank(26, n_fft, 1000, 25, 400);
    for (int m = 0; m < fb.n_filters; ++m) {
        std::vector<double> frame(static_cast<std::size_t>(n_fft));
        const auto w = make_window(WindowKind::Hamming, n_fft);
        for (int n = 0; n < n_fft; ++n) frame[n] = w[n] * std::sin(2 * kPi * fb.centers_hz[m] * n / 1000.0);
        const auto energies = fb.apply(reference_power(frame, n_fft));
        const auto best = std::max_element(energies.begin(), energies.end()) - energies.begin();
        CHECK(best == m);
        for (int j = 0; j < fb.n_filters; ++j) if (j != m) CHECK(energies[j] < energies[m]);
    }
}

TEST_CASE("power spectrum matches a direct DFT") {
    Rng rng(12);
    const auto frame = noise(rng, 50);
    const auto ref = reference_power(frame, 64);
    const auto got = power_spectrum(frame, 64);
    REQUIRE(got.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(got[k] == doctest::Approx(ref[k]).epsilon(1e-10));
}

TEST_CASE("dct: orthonormal matrix, reference values, transpose inverts") {
    Rng rng(13);
    const auto x = noise(rng, 26);
    const auto c = dct2(x);
    for (int k = 0; k < 26; ++k) CHECK(c[k] == doctest::Approx(reference_dct(x, k)).epsilon(1e-12));
    const auto back = dct2_transpose(c);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-9);
    const auto m = dct2_matrix(8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            double dot = 0;
            for (int k = 0; k < 8; ++k) dot += m[i * 8 + k] * m[j * 8 + k];
            CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("mfcc: 96 x 12 map equal to the reference pipeline") {
    Rng rng(14);
    const auto x = noise(rng, 1000);
    const auto map = mfcc_map(norm_beat(x), FrameConfig{}, make_mel_filterbank());
    REQUIRE(map.frames == 96);
    REQUIRE(map.coefficients == 12);
    CHECK(map.kind == FeatureKind::Mfcc);
    const auto ref = reference_mfcc(x);
    REQUIRE(ref.size() == map.values.size());
    double worst = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - map.values[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("mfcc: silence maps to all-zero c1..c12") {
    const auto map = mfcc_map(norm_beat(std::vector<double>(1000, 0.0)), FrameConfig{}, make_mel_filterbank());
    for (double v : map.values) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("mfcc: gain moves only c0, by ln(4) * sqrt(26) for a factor of two") {
    Rng rng(15);
    auto x = noise(rng, 1000);
    auto x2 = x;
    for (double& v : x2) v *= 2.0;
    const auto fb = make_mel_filterbank();
    const auto a = mfcc_map(norm_beat(x), FrameConfig{}, fb), b = mfcc_map(norm_beat(x2), FrameConfig{}, fb);
    double worst = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
    CHECK(worst < 1e-6);

    MfccOptions with_c0;
    with_c0.include_c0 = true;
    const auto a0 = mfcc_map(norm_beat(x), FrameConfig{}, fb, with_c0), b0 = mfcc_map(norm_beat(x2), FrameConfig{}, fb, with_c0);
    for (std::size_t t = 0; t < a0.frames; ++t) {
        CHECK(b0.at(t, 0) - a0.at(t, 0) == doctest::Approx(std::log(4.0) * std::sqrt(26.0)).epsilon(1e-9));
    }
}

TEST_CASE("mfcc: permuting non-overlapping frames permutes map rows") {
    Rng rng(16);
    const auto x = noise(rng, 1000);
    const FrameConfig cfg{50, 50, WindowKind::Hamming};
    std::vector<std::size_t> order(20);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    std::vector<double> y(1000);
    for (std::size_t i = 0; i < 20; ++i) std::copy_n(x.begin() + order[i] * 50, 50, y.begin() + i * 50);
    const auto fb = make_mel_filterbank();
    const auto mx = mfcc_map(x, cfg, fb), my = mfcc_map(y, cfg, fb);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t d = 0; d < 12; ++d) REQUIRE(my.at(i, d) == mx.at(order[i], d));
    }
}

TEST_CASE("mfcc: requires a normalised beat") {
    Beat b;
    b.samples.assign(1000, 0.0);
    b.length_policy = LengthPolicy::Raw;
    CHECK_THROWS(mfcc_map(b, FrameConfig{}, make_mel_filterbank()));
}

TEST_CASE("levinson: white noise autocorrelation predicts nothing") {
    std::vector<double> r(13, 0.0);
    r[0] = 1.0;
    const auto res = levinson_durbin(r, 12);
    for (double a : res.coefficients) CHECK(a == 0.0);
    CHECK(res.residual_energy == 1.0);
}

TEST_CASE("levinson: analytic AR(1) autocorrelation recovers a = 0.9") {
    std::vector<double> r(13);
    for (int k = 0; k <= 12; ++k) r[k] = std::pow(0.9, k);
    const auto res = levinson_durbin(r, 12);
    CHECK(std::abs(res.coefficients[0] - 0.9) < 1e-8);
    for (int k = 1; k < 12; ++k) CHECK(std::abs(res.coefficients[k]) < 1e-8);
    CHECK(res.residual_energy == doctest::Approx(1.0 - 0.81).epsilon(1e-10));
}

TEST_CASE("levinson: agrees with a direct Toeplitz solve on random PSD sequences") {
    Rng rng(17);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int p = trial < 100 ? 4 : 12;
        const auto x = noise(rng, 64 + uniform_index(rng, 400));
        const auto r = reference_autocorr(x, p);
        const auto res = levinson_durbin(r, p);
        const auto direct = toeplitz_solve(r, p);
        for (int k = 0; k < p; ++k) worst = std::max(worst, std::abs(res.coefficients[k] - direct[k]));
        for (std::size_t k = 1; k < res.errors.size(); ++k) REQUIRE(res.errors[k] <= res.errors[k - 1] * (1 + 1e-12));
        REQUIRE(res.errors.size() == static_cast<std::size_t>(p + 1));
        CHECK(res.errors.back() == doctest::Approx(res.residual_energy));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("levinson: a singular sequence is a numeric error") {
    CHECK_THROWS_AS(levinson_durbin(std::vector<double>{1.0, 1.0, 1.0}, 2), NumericError);
    CHECK_THROWS(levinson_durbin(std::vector<double>{1.0, 0.5}, 2));
}

TEST_CASE("autocorrelation: biased estimator") {
    Rng rng(18);
    const auto x = noise(rng, 100);
    const auto r = autocorrelation(x, 12);
    const auto ref = reference_autocorr(x, 12);
    for (int k = 0; k <= 12; ++k) CHECK(r[k] == doctest::Approx(ref[k]).epsilon(1e-12));
}

TEST_CASE("tvar: zero beat gives a zero 96 x 12 map") {
    const auto map = tvar_map(norm_beat(std::vector<double>(1000, 0.0)), FrameConfig{});
    CHECK(map.frames == 96);
    CHECK(map.coefficients == 12);
    CHECK(map.kind == FeatureKind::Tvar);
    for (double v : map.values) REQUIRE(v == 0.0);
}

TEST_CASE("tvar: shape is always 96 x 12") {
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        const auto map = tvar_map(norm_beat(noise(rng, 1000)), FrameConfig{});
        CHECK(map.frames == 96);
        CHECK(map.values.size() == 96 * 12);
    }
}

TEST_CASE("tvar: AR(1) frames give a first coefficient near 0.9") {
    Rng rng(20);
    std::vector<double> x(20000);
    double prev = 0;
    for (double& v : x) {
        v = 0.9 * prev + standard_normal(rng);
        prev = v;
    }
    const auto map = tvar_map(x, FrameConfig{500, 250, WindowKind::Hamming});
    double mean = 0;
    for (std::size_t t = 0; t < map.frames; ++t) mean += map.at(t, 0);
    mean /= static_cast<double>(map.frames);
    CHECK(std::abs(mean - 0.9) < 0.05);
}

TEST_CASE("feature dump: encode/decode round trip") {
    Rng rng(22);
    std::vector<LabelledFeatureMap> maps(2);
    for (int i = 0; i < 2; ++i) {
        maps[i].map = mfcc_map(norm_beat(noise(rng, 1000)), FrameConfig{}, make_mel_filterbank());
        maps[i].label = i ? Label::Abnormal : Label::Normal;
        maps[i].id = "b" + std::to_string(i);
    }
    const auto back = decode_feature_maps(encode_feature_maps(maps));
    REQUIRE(back.size() == 2);
    CHECK(back[1].id == "b1");
    CHECK(back[1].label == Label::Abnormal);
    CHECK(back[0].map.frames == 96);
    CHECK(back[0].map.values[5] == static_cast<double>(static_cast<float>(maps[0].map.values[5])));
}
