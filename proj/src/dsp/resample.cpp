#include <cmath>
#include <numeric>

#include "vts/dsp.hpp"

namespace vts::dsp {

namespace {

// Zeroth-order modified Bessel function of the first kind (series).
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= (x / (2.0 * k)) * (x / (2.0 * k));
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    return std::sin(M_PI * x) / (M_PI * x);
}

}  // namespace

AudioClip resample(const AudioClip& audio, int target_rate) {
    if (target_rate <= 0 || audio.sample_rate <= 0)
        throw InvalidArgument("resample: rates must be positive");
    if (target_rate == audio.sample_rate) return audio;

    long g = std::gcd(audio.sample_rate, target_rate);
    long up = target_rate / g;     // L
    long down = audio.sample_rate / g;  // M

    // Kaiser-windowed sinc lowpass on the L-upsampled grid, 64 taps/phase.
    const int taps_per_phase = 64;
    long half = taps_per_phase * up / 2;
    long flen = 2 * half + 1;
    double cutoff = 1.0 / std::max(up, down);  // of upsampled Nyquist
    const double beta = 8.0;
    std::vector<double> h(flen);
    double i0b = bessel_i0(beta);
    for (long n = 0; n < flen; ++n) {
        double m = static_cast<double>(n - half);
        double w = bessel_i0(beta * std::sqrt(std::max(
                       0.0, 1.0 - (m / half) * (m / half)))) /
                   i0b;
        h[n] = cutoff * sinc(cutoff * m) * w * up;
    }

    long n_in = static_cast<long>(audio.samples.size());
    long n_out = std::lround(static_cast<double>(n_in) * target_rate /
                             audio.sample_rate);
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    for (long j = 0; j < n_out; ++j) {
        long u = j * down;  // output position on the upsampled grid
        double acc = 0.0;
        // nonzero input taps: h[u + half - i*up] for i near u/up
        long i_lo = (u - half + up - 1) / up;
        long i_hi = (u + half) / up;
        if (i_lo < 0) i_lo = 0;
        if (i_hi >= n_in) i_hi = n_in - 1;
        for (long i = i_lo; i <= i_hi; ++i)
            acc += h[u + half - i * up] * audio.samples[i];
        out.samples[j] = static_cast<float>(acc);
    }
    return out;
}

}  // namespace vts::dsp
