#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "vts/dsp.hpp"

namespace vts::dsp {

namespace {

// Least-squares inversion of the mel projection, entries clamped to >= 0.
std::vector<double> mel_to_linear(const MelSpectrogram& mel) {
    int bins = kFftSize / 2 + 1;
    static const Eigen::MatrixXd pinv = [] {
        auto fb = mel_filterbank(kMelBands, kFftSize, kPipelineSampleRate,
                                 kMelFMin, kMelFMax);
        Eigen::MatrixXd M(kMelBands, kFftSize / 2 + 1);
        for (int m = 0; m < kMelBands; ++m)
            for (int b = 0; b < kFftSize / 2 + 1; ++b)
                M(m, b) = fb[static_cast<long>(m) * (kFftSize / 2 + 1) + b];
        return M.completeOrthogonalDecomposition().pseudoInverse().eval();
    }();

    std::vector<double> mag(static_cast<long>(mel.frames) * bins);
    Eigen::VectorXd melvec(kMelBands);
    for (int f = 0; f < mel.frames; ++f) {
        for (int m = 0; m < kMelBands; ++m) {
            // Undo rescale and log10; floor survives as a tiny magnitude.
            double logv = mel.at(f, m) * kLogMelClip;
            melvec(m) = std::pow(10.0, logv);
        }
        Eigen::VectorXd lin = pinv * melvec;
        for (int b = 0; b < bins; ++b)
            mag[static_cast<long>(f) * bins + b] = std::max(0.0, lin(b));
    }
    return mag;
}

}  // namespace

AudioClip griffin_lim(const MelSpectrogram& mel, int iterations,
                      std::vector<double>* errors) {
    if (iterations < 1) throw InvalidArgument("griffin_lim: iterations >= 1");
    if (mel.frames < 1) throw InvalidArgument("griffin_lim: empty mel");
    StftParams params;
    int bins = params.fft_size / 2 + 1;
    auto target = mel_to_linear(mel);
    int frames = mel.frames;
    int out_len = frames * params.hop_size;

    // Zero-phase start; each iteration projects onto the target-magnitude set
    // and then onto the set of consistent spectrograms (via istft/stft).
    Spectrogram spec;
    spec.frames = frames;
    spec.bins = bins;
    spec.values.resize(static_cast<long>(frames) * bins);
    for (long i = 0; i < static_cast<long>(spec.values.size()); ++i)
        spec.values[i] = {target[i], 0.0};

    AudioClip out;
    out.sample_rate = kPipelineSampleRate;
    if (errors) errors->clear();
    for (int it = 0; it < iterations; ++it) {
        auto x = istft(spec, params, out_len);
        AudioClip clip;
        clip.sample_rate = kPipelineSampleRate;
        clip.samples.assign(x.begin(), x.end());
        Spectrogram re = stft(clip, params);
        if (errors) {
            double err = 0;
            long n = std::min<long>(re.values.size(), target.size());
            for (long i = 0; i < n; ++i) {
                double d = std::abs(re.values[i]) - target[i];
                err += d * d;
            }
            errors->push_back(std::sqrt(err));
        }
        // Re-impose target magnitudes, keep recovered phases.
        for (long i = 0;
             i < static_cast<long>(std::min(re.values.size(), target.size()));
             ++i) {
            double m = std::abs(re.values[i]);
            spec.values[i] =
                m > 1e-12 ? re.values[i] / m * target[i]
                          : std::complex<double>(target[i], 0.0);
        }
        out.samples = std::move(clip.samples);
    }
    return out;
}

}  // namespace vts::dsp
