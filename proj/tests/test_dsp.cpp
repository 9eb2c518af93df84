#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "vts/common.hpp"
#include "vts/dsp.hpp"

using namespace vts;
using namespace vts::dsp;

namespace {

AudioClip tone(double freq, double seconds, int sr, double amp = 0.5) {
    AudioClip c;
    c.sample_rate = sr;
    c.samples.resize(static_cast<std::size_t>(seconds * sr));
    for (std::size_t i = 0; i < c.samples.size(); ++i)
        c.samples[i] =
            static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / sr));
    return c;
}

AudioClip noise(double seconds, int sr, std::uint64_t seed, double amp = 0.3) {
    Rng rng(seed);
    AudioClip c;
    c.sample_rate = sr;
    c.samples.resize(static_cast<std::size_t>(seconds * sr));
    for (auto& s : c.samples)
        s = static_cast<float>(rng.uniform(-amp, amp));
    return c;
}

}  // namespace

TEST_CASE("hann window closed forms") {
    CHECK_THROWS_AS(hann_window(0), InvalidArgument);
    auto w1 = hann_window(1);
    CHECK(w1.size() == 1);
    CHECK(w1[0] == 0.0);

    auto w4 = hann_window(4);
    CHECK(w4[0] == doctest::Approx(0.0));
    CHECK(w4[1] == doctest::Approx(0.5));
    CHECK(w4[2] == doctest::Approx(1.0));
    CHECK(w4[3] == doctest::Approx(0.5));

    auto w = hann_window(2048);
    int argmax = 0;
    for (int i = 0; i < 2048; ++i)
        if (w[i] > w[argmax]) argmax = i;
    CHECK(argmax == 1024);
    CHECK(w[1024] == doctest::Approx(1.0));
    for (int i = 1; i < 1024; ++i)
        CHECK(w[1024 - i] == doctest::Approx(w[1024 + i]).epsilon(1e-12));
}

TEST_CASE("stft frame count, zeros, linearity") {
    StftParams p;  // fft 2048, hop 300, win 1200, center
    AudioClip silence;
    silence.samples.assign(24000, 0.0f);
    auto s = stft(silence, p);
    CHECK(s.frames == 81);  // floor(24000/300)+1
    CHECK(s.bins == 1025);
    for (auto v : s.values) CHECK(std::abs(v) == 0.0);

    AudioClip empty;
    CHECK_THROWS_AS(stft(empty, p), InvalidArgument);

    auto x = noise(0.2, 24000, 7);
    AudioClip x2 = x;
    for (auto& v : x2.samples) v *= 2.0f;
    auto sa = stft(x, p), sb = stft(x2, p);
    for (std::size_t i = 0; i < sa.values.size(); ++i) {
        double ma = std::abs(sa.values[i]), mb = std::abs(sb.values[i]);
        if (ma > 1e-8) CHECK(mb / ma == doctest::Approx(2.0).epsilon(1e-6));
    }
}

TEST_CASE("mel filterbank structure") {
    auto fb = mel_filterbank(80, 2048, 24000, 0.0, 12000.0);
    int bins = 1025;
    CHECK(fb.size() == static_cast<std::size_t>(80 * bins));
    for (double v : fb) CHECK(v >= 0.0);
    for (int m = 0; m < 80; ++m) {
        double row = 0;
        for (int b = 0; b < bins; ++b) row += fb[m * bins + b];
        CHECK(row > 0.0);
    }
    // column coverage across the passband (skip DC which sits on a triangle
    // endpoint by construction)
    for (int b = 1; b < bins - 1; ++b) {
        double col = 0;
        for (int m = 0; m < 80; ++m) col += fb[m * bins + b];
        CHECK(col > 0.0);
    }
    CHECK_THROWS_AS(mel_filterbank(80, 2048, 24000, 6000.0, 6000.0),
                    InvalidArgument);
}

TEST_CASE("log mel: silence is exactly -1; 80 frames per second") {
    AudioClip silence;
    silence.sample_rate = 24000;
    silence.samples.assign(24000, 0.0f);
    auto mel = log_mel_spectrogram(silence);
    CHECK(mel.frames == 80);
    CHECK(mel.n_mels == 80);
    for (double v : mel.values) CHECK(v == -1.0);

    auto x = noise(2.0, 24000, 3);
    auto m2 = log_mel_spectrogram(x);
    CHECK(m2.frames == 160);
    for (double v : m2.values) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // determinism
    auto m3 = log_mel_spectrogram(x);
    CHECK(m2.values == m3.values);

    AudioClip wrong = x;
    wrong.sample_rate = 16000;
    CHECK_THROWS_AS(log_mel_spectrogram(wrong), SampleRateMismatch);
}

TEST_CASE("mfcc: silence gives constant c0, zero higher coefficients") {
    AudioClip silence;
    silence.sample_rate = 24000;
    silence.samples.assign(24000, 0.0f);
    auto m = mfcc(silence);
    CHECK(m.n_coeffs == 25);
    CHECK(m.frames >= 1);
    double c0 = m.values[0];
    for (int f = 0; f < m.frames; ++f) {
        CHECK(m.values[f * 25] == doctest::Approx(c0));
        for (int k = 1; k < 25; ++k)
            CHECK(std::fabs(m.values[f * 25 + k]) < 1e-6);
    }
    auto x = noise(0.5, 24000, 4);
    auto a = mfcc(x), b = mfcc(x);
    CHECK(a.values == b.values);
}

TEST_CASE("resample: identity, length ratio, tone preservation") {
    auto x = noise(1.0, 24000, 5);
    auto same = resample(x, 24000);
    CHECK(same.samples == x.samples);

    auto down = resample(x, 10000);
    CHECK(down.samples.size() == 10000);
    CHECK(down.sample_rate == 10000);

    // 440 Hz tone survives with its FFT peak in place
    auto t = tone(440.0, 1.0, 24000);
    auto t10 = resample(t, 10000);
    int n = static_cast<int>(t10.samples.size());
    double best = 0;
    int best_bin = 0;
    for (int k = 1; k < n / 2; ++k) {
        std::complex<double> acc = 0;
        for (int i = 0; i < n; ++i)
            acc += static_cast<double>(t10.samples[i]) *
                   std::exp(std::complex<double>(0, -2.0 * M_PI * k * i / n));
        if (std::abs(acc) > best) {
            best = std::abs(acc);
            best_bin = k;
        }
    }
    double peak_hz = best_bin * 10000.0 / n;
    CHECK(std::fabs(peak_hz - 440.0) <= 10000.0 / n + 1e-9);

    CHECK_THROWS_AS(resample(x, 0), InvalidArgument);
}

TEST_CASE("griffin-lim: length, monotone error, silence in silence out") {
    auto x = tone(880.0, 0.5, 24000, 0.4);
    auto mel = log_mel_spectrogram(x);
    std::vector<double> errors;
    auto rec = griffin_lim(mel, 32, &errors);
    CHECK(rec.sample_rate == 24000);
    long expect = static_cast<long>(mel.frames) * 300;
    CHECK(std::labs(static_cast<long>(rec.samples.size()) - expect) <= 2048);
    REQUIRE(errors.size() == 32);
    for (std::size_t i = 1; i < errors.size(); ++i)
        CHECK(errors[i] <= errors[i - 1] + 1e-9 * (1.0 + errors[i - 1]));

    MelSpectrogram silent;
    silent.frames = 40;
    silent.values.assign(40 * 80, -1.0);
    auto quiet = griffin_lim(silent, 4);
    double rms = 0;
    for (float v : quiet.samples) rms += static_cast<double>(v) * v;
    rms = std::sqrt(rms / quiet.samples.size());
    CHECK(rms < 1e-3);
}

TEST_CASE("istft round trip on the analysis grid") {
    StftParams p;
    auto x = noise(0.5, 24000, 6);
    auto s = stft(x, p);
    auto y = istft(s, p, static_cast<int>(x.samples.size()));
    // interior samples reconstruct well (COLA with hann + these hops)
    for (std::size_t i = 2048; i + 2048 < y.size(); ++i)
        CHECK(y[i] == doctest::Approx(static_cast<double>(x.samples[i]))
                          .epsilon(1e-6));
}
