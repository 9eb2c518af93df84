#include <algorithm>
#include <cmath>

#include "../common/fft.hpp"
#include "vts/dsp.hpp"

namespace vts::dsp {

void StftParams::validate() const {
    if (fft_size < 1 || hop_size < 1 || win_length < 1)
        throw InvalidArgument("StftParams: sizes must be positive");
    if (win_length > fft_size)
        throw InvalidArgument("StftParams: win_length > fft_size");
    if (hop_size > win_length)
        throw InvalidArgument("StftParams: hop_size > win_length");
}

std::vector<double> hann_window(int n) {
    if (n < 1) throw InvalidArgument("hann_window: n must be >= 1");
    std::vector<double> w(n);
    for (int k = 0; k < n; ++k)
        w[k] = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / n));
    return w;
}

namespace detail_stft {

// Signal padded (reflect) for centered analysis; window padded to fft_size
// and centered. Frame f covers padded[f*hop .. f*hop+fft).
std::vector<double> padded_signal(const AudioClip& audio,
                                  const StftParams& p) {
    const auto& x = audio.samples;
    long n = static_cast<long>(x.size());
    if (!p.center_pad) {
        std::vector<double> out(n);
        for (long i = 0; i < n; ++i) out[i] = x[i];
        return out;
    }
    int half = p.fft_size / 2;
    std::vector<double> out(n + 2L * half);
    auto reflect = [n](long i) {
        if (n == 1) return 0L;
        long period = 2 * (n - 1);
        i = ((i % period) + period) % period;
        return i < n ? i : period - i;
    };
    for (long i = 0; i < static_cast<long>(out.size()); ++i)
        out[i] = x[reflect(i - half)];
    return out;
}

std::vector<double> centered_window(const StftParams& p) {
    auto w = hann_window(p.win_length);
    std::vector<double> full(p.fft_size, 0.0);
    int off = (p.fft_size - p.win_length) / 2;
    for (int i = 0; i < p.win_length; ++i) full[off + i] = w[i];
    return full;
}

int frame_count(long n_samples, const StftParams& p) {
    if (p.center_pad) return static_cast<int>(n_samples / p.hop_size) + 1;
    long usable = n_samples - p.fft_size;
    return usable >= 0 ? static_cast<int>(usable / p.hop_size) + 1 : 0;
}

}  // namespace detail_stft

Spectrogram stft(const AudioClip& audio, const StftParams& params) {
    params.validate();
    if (audio.samples.empty()) throw InvalidArgument("stft: empty audio");
    auto padded = detail_stft::padded_signal(audio, params);
    auto window = detail_stft::centered_window(params);
    int frames = detail_stft::frame_count(
        static_cast<long>(audio.samples.size()), params);
    if (frames < 1) throw InvalidArgument("stft: input shorter than one frame");

    vts::detail::RealFft fft(params.fft_size);
    Spectrogram spec;
    spec.frames = frames;
    spec.bins = fft.bins();
    spec.values.resize(static_cast<long>(frames) * spec.bins);
    std::vector<double> frame(params.fft_size);
    for (int f = 0; f < frames; ++f) {
        long start = static_cast<long>(f) * params.hop_size;
        for (int i = 0; i < params.fft_size; ++i)
            frame[i] = padded[start + i] * window[i];
        fft.forward(frame.data(),
                    spec.values.data() + static_cast<long>(f) * spec.bins);
    }
    return spec;
}

std::vector<double> stft_magnitudes(const AudioClip& audio,
                                    const StftParams& params, int* frames,
                                    int* bins) {
    Spectrogram spec = stft(audio, params);
    std::vector<double> mag(spec.values.size());
    for (std::size_t i = 0; i < spec.values.size(); ++i)
        mag[i] = std::abs(spec.values[i]);
    if (frames) *frames = spec.frames;
    if (bins) *bins = spec.bins;
    return mag;
}

std::vector<double> istft(const Spectrogram& spec, const StftParams& params,
                          int out_length) {
    params.validate();
    auto window = detail_stft::centered_window(params);
    int fft_size = params.fft_size;
    long padded_len =
        static_cast<long>(spec.frames - 1) * params.hop_size + fft_size;
    std::vector<double> acc(padded_len, 0.0);
    std::vector<double> wsum(padded_len, 0.0);
    vts::detail::RealFft fft(fft_size);
    std::vector<double> frame(fft_size);
    for (int f = 0; f < spec.frames; ++f) {
        fft.inverse(spec.values.data() + static_cast<long>(f) * spec.bins,
                    frame.data());
        long start = static_cast<long>(f) * params.hop_size;
        for (int i = 0; i < fft_size; ++i) {
            acc[start + i] += frame[i] * window[i];
            wsum[start + i] += window[i] * window[i];
        }
    }
    int half = params.center_pad ? fft_size / 2 : 0;
    std::vector<double> out(out_length, 0.0);
    for (int i = 0; i < out_length; ++i) {
        long j = i + half;
        if (j < padded_len && wsum[j] > 1e-9) out[i] = acc[j] / wsum[j];
    }
    return out;
}

}  // namespace vts::dsp
