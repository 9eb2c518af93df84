#include <algorithm>
#include <cmath>

#include "vts/dsp.hpp"

namespace vts::dsp {

namespace {

// HTK mel scale.
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

std::vector<double> mel_filterbank(int n_mels, int fft_size, int sample_rate,
                                   double f_min, double f_max) {
    if (f_min < 0 || f_min >= f_max || f_max > sample_rate / 2.0)
        throw InvalidArgument("mel_filterbank: need 0 <= f_min < f_max <= sr/2");
    int bins = fft_size / 2 + 1;
    double mel_lo = hz_to_mel(f_min), mel_hi = hz_to_mel(f_max);
    std::vector<double> centers(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

    std::vector<double> fb(static_cast<long>(n_mels) * bins, 0.0);
    for (int m = 0; m < n_mels; ++m) {
        double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
        for (int b = 0; b < bins; ++b) {
            double f = static_cast<double>(b) * sample_rate / fft_size;
            double w = 0.0;
            if (f > lo && f < hi)
                w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            fb[static_cast<long>(m) * bins + b] = std::max(0.0, w);
        }
        // Guarantee every row has support even if the triangle is narrower
        // than one FFT bin (possible at low frequencies with big FFTs).
        bool any = false;
        for (int b = 0; b < bins; ++b)
            any = any || fb[static_cast<long>(m) * bins + b] > 0;
        if (!any) {
            int b = static_cast<int>(std::round(mid * fft_size / sample_rate));
            b = std::clamp(b, 0, bins - 1);
            fb[static_cast<long>(m) * bins + b] = 1.0;
        }
    }
    return fb;
}

namespace {

// mag [frames x bins] -> mel energies [frames x n_mels].
std::vector<double> apply_filterbank(const std::vector<double>& mag, int frames,
                                     int bins, const std::vector<double>& fb,
                                     int n_mels) {
    std::vector<double> out(static_cast<long>(frames) * n_mels, 0.0);
    for (int f = 0; f < frames; ++f)
        for (int m = 0; m < n_mels; ++m) {
            double s = 0;
            const double* fbr = fb.data() + static_cast<long>(m) * bins;
            const double* mr = mag.data() + static_cast<long>(f) * bins;
            for (int b = 0; b < bins; ++b) s += fbr[b] * mr[b];
            out[static_cast<long>(f) * n_mels + m] = s;
        }
    return out;
}

void check_rate(const AudioClip& audio) {
    if (audio.sample_rate != kPipelineSampleRate)
        throw SampleRateMismatch("expected 24 kHz audio, got " +
                                 std::to_string(audio.sample_rate) + " Hz");
}

}  // namespace

MelSpectrogram log_mel_spectrogram(const AudioClip& audio) {
    check_rate(audio);
    StftParams params;
    int frames = 0, bins = 0;
    auto mag = stft_magnitudes(audio, params, &frames, &bins);
    static const std::vector<double> fb = mel_filterbank(
        kMelBands, kFftSize, kPipelineSampleRate, kMelFMin, kMelFMax);
    auto mel = apply_filterbank(mag, frames, bins, fb, kMelBands);

    // Truncate the trailing center-padding frame: N seconds -> 80 N frames.
    int keep = std::max<int>(
        1, static_cast<int>(audio.samples.size() / params.hop_size));
    keep = std::min(keep, frames);

    MelSpectrogram out;
    out.frames = keep;
    out.values.resize(static_cast<long>(keep) * kMelBands);
    for (long i = 0; i < static_cast<long>(out.values.size()); ++i) {
        double v = std::log10(std::max(mel[i], kMagnitudeFloor));
        v = std::clamp(v, -kLogMelClip, kLogMelClip);
        out.values[i] = v / kLogMelClip;
    }
    return out;
}

MfccMatrix mfcc(const AudioClip& audio) {
    check_rate(audio);
    StftParams params;
    int frames = 0, bins = 0;
    auto mag = stft_magnitudes(audio, params, &frames, &bins);
    static const std::vector<double> fb = mel_filterbank(
        kMelBands, kFftSize, kPipelineSampleRate, kMelFMin, kMelFMax);
    auto mel = apply_filterbank(mag, frames, bins, fb, kMelBands);

    MfccMatrix out;
    out.frames = frames;
    out.values.assign(static_cast<long>(frames) * kMfccCoeffs, 0.0);
    // Orthonormal DCT-II over the mel axis, coefficients 0..24.
    for (int f = 0; f < frames; ++f) {
        for (int k = 0; k < kMfccCoeffs; ++k) {
            double s = 0;
            for (int m = 0; m < kMelBands; ++m) {
                double lm = std::log(
                    std::max(mel[static_cast<long>(f) * kMelBands + m],
                             kMagnitudeFloor));
                s += lm * std::cos(M_PI * k * (2 * m + 1) / (2.0 * kMelBands));
            }
            double norm = k == 0 ? std::sqrt(1.0 / kMelBands)
                                 : std::sqrt(2.0 / kMelBands);
            out.values[static_cast<long>(f) * kMfccCoeffs + k] = s * norm;
        }
    }
    return out;
}

}  // namespace vts::dsp
