#pragma once

#include <complex>
#include <vector>

#include "vts/common.hpp"

namespace vts::dsp {

// Pipeline constants. The clip range and floor make "digital silence" map to
// exactly -1 after rescaling.
inline constexpr int kPipelineSampleRate = 24000;
inline constexpr int kFftSize = 2048;
inline constexpr int kHopSize = 300;   // 12.5 ms at 24 kHz
inline constexpr int kWinLength = 1200;  // 50 ms at 24 kHz
inline constexpr int kMelBands = 80;
inline constexpr int kMfccCoeffs = 25;
inline constexpr int kMelFrameRate = 80;
inline constexpr double kMagnitudeFloor = 1e-10;
inline constexpr double kLogMelClip = 6.0;
inline constexpr double kMelFMin = 0.0;
inline constexpr double kMelFMax = 12000.0;

struct StftParams {
    int fft_size = kFftSize;
    int hop_size = kHopSize;
    int win_length = kWinLength;
    bool center_pad = true;

    void validate() const;
};

struct Spectrogram {
    std::vector<std::complex<double>> values;  // row-major [frames x bins]
    int frames = 0;
    int bins = 0;

    std::complex<double> at(int f, int b) const {
        return values[static_cast<long>(f) * bins + b];
    }
};

struct MelSpectrogram {
    std::vector<double> values;  // row-major [frames x n_mels]
    int frames = 0;
    int n_mels = kMelBands;
    int frame_rate = kMelFrameRate;

    double at(int f, int m) const {
        return values[static_cast<long>(f) * n_mels + m];
    }
};

struct MfccMatrix {
    std::vector<double> values;  // row-major [frames x n_coeffs]
    int frames = 0;
    int n_coeffs = kMfccCoeffs;
};

// Periodic Hann: w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(int n);

Spectrogram stft(const AudioClip& audio, const StftParams& params);
std::vector<double> stft_magnitudes(const AudioClip& audio,
                                    const StftParams& params, int* frames,
                                    int* bins);

// Triangular filters on the HTK mel scale; [n_mels x (fft_size/2+1)],
// row-major.
std::vector<double> mel_filterbank(int n_mels, int fft_size, int sample_rate,
                                   double f_min, double f_max);

// |STFT| -> mel -> log10 (floor 1e-10) -> clip [-6,6] -> /6. Truncated to
// exactly floor(len/hop) frames so an N-second clip yields 80 N frames.
MelSpectrogram log_mel_spectrogram(const AudioClip& audio);

// Natural-log mel (unclipped) followed by orthonormal DCT-II, coeffs 0..24.
MfccMatrix mfcc(const AudioClip& audio);

// Band-limited polyphase resampling (Kaiser-windowed sinc, 64 taps/phase).
AudioClip resample(const AudioClip& audio, int target_rate);

// Inverts the log-mel pipeline approximately via iterative phase recovery.
// If `errors` is non-null it receives the Frobenius magnitude error after
// each iteration.
AudioClip griffin_lim(const MelSpectrogram& mel, int iterations,
                      std::vector<double>* errors = nullptr);

// Overlap-add inverse of `stft` (used by griffin_lim and tests).
std::vector<double> istft(const Spectrogram& spec, const StftParams& params,
                          int out_length);

}  // namespace vts::dsp
