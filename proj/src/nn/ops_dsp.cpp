#include <cmath>
#include <complex>

#include "../common/fft.hpp"
#include "vts/tensor.hpp"

namespace vts::nn {

namespace {

constexpr Real kMagEps = 1e-12;

std::vector<Real> centered_window(const StftSpec& s) {
    std::vector<Real> w(s.fft_size, 0.0);
    int off = (s.fft_size - s.win_length) / 2;
    for (int k = 0; k < s.win_length; ++k)
        w[off + k] = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / s.win_length));
    return w;
}

}  // namespace

Tensor stft_magnitude(const Tensor& x, const StftSpec& spec) {
    if (x.shape().size() != 1)
        throw InvalidArgument("stft_magnitude: expects 1-D signal");
    long n = x.size();
    if (n < 1) throw InvalidArgument("stft_magnitude: empty signal");
    int half = spec.center ? spec.fft_size / 2 : 0;
    int frames;
    if (spec.center) {
        frames = static_cast<int>(n / spec.hop_size) + 1;
    } else {
        long usable = n - spec.fft_size;
        if (usable < 0) throw InvalidArgument("stft_magnitude: too short");
        frames = static_cast<int>(usable / spec.hop_size) + 1;
    }
    int bins = spec.fft_size / 2 + 1;
    auto window = centered_window(spec);

    // Reflect-padded copy of the signal; padding index map kept for backward.
    auto reflect = [n, half](long i) {
        long s = i - half;
        if (n == 1) return 0L;
        long period = 2 * (n - 1);
        s = ((s % period) + period) % period;
        return s < n ? s : period - s;
    };

    auto fft = std::make_shared<vts::detail::RealFft>(spec.fft_size);
    auto spectra = std::make_shared<std::vector<std::complex<Real>>>(
        static_cast<long>(frames) * bins);

    int fft_size = spec.fft_size;
    int hop = spec.hop_size;
    Tensor out = make_op({frames, bins}, {x},
                         [frames, bins, fft_size, hop, window, reflect, fft,
                          spectra, n](Node& node) {
        auto& p = *node.parents[0];
        p.ensure_grad();
        // d|X_k|/dx = Re(conj(X_k)/|X_k| dX_k/dx): weight each bin's grad
        // by the unit phasor, inverse-FFT, window, scatter-add.
        std::vector<std::complex<Real>> c(bins);
        std::vector<Real> frame(fft_size);
        for (int f = 0; f < frames; ++f) {
            const auto* S = spectra->data() + static_cast<long>(f) * bins;
            for (int b = 0; b < bins; ++b) {
                Real mag = std::abs(S[b]);
                std::complex<Real> unit =
                    mag > kMagEps ? S[b] / mag : std::complex<Real>(0, 0);
                Real g = node.grad[static_cast<long>(f) * bins + b];
                // c2r doubles interior bins (hermitian symmetry); halve them
                // so the synthesized frame equals sum_k g_k Re(u_k e^{iwkt}).
                Real w = (b == 0 || b == bins - 1) ? 1.0 : 0.5;
                c[b] = unit * (g * w);
            }
            fft->inverse(c.data(), frame.data());
            long start = static_cast<long>(f) * hop;
            for (int i = 0; i < fft_size; ++i) {
                Real gi = frame[i] * fft_size;  // undo inverse normalization
                p.grad[reflect(start + i)] += gi * window[i];
            }
        }
    });

    std::vector<Real> frame(fft_size);
    for (int f = 0; f < frames; ++f) {
        long start = static_cast<long>(f) * hop;
        for (int i = 0; i < fft_size; ++i)
            frame[i] = x.val()[reflect(start + i)] * window[i];
        fft->forward(frame.data(),
                     spectra->data() + static_cast<long>(f) * bins);
        for (int b = 0; b < bins; ++b)
            out.val()[static_cast<long>(f) * bins + b] =
                std::abs((*spectra)[static_cast<long>(f) * bins + b]);
    }
    return out;
}

}  // namespace vts::nn
