#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "vts/dsp.hpp"
#include "vts/eval.hpp"

namespace vts::eval {

namespace {

constexpr double kEps = 2.220446049250313e-16;

// symmetric Hann without its zero endpoints
std::vector<double> stoi_window() {
    std::vector<double> w(kStoiFrame);
    for (int k = 0; k < kStoiFrame; ++k)
        w[k] = 0.5 * (1.0 - std::cos(2.0 * M_PI * (k + 1) / (kStoiFrame + 1)));
    return w;
}

std::vector<std::vector<double>> frame_signal(const std::vector<double>& x,
                                              const std::vector<double>& w) {
    std::vector<std::vector<double>> frames;
    if (static_cast<int>(x.size()) < kStoiFrame) return frames;
    int n = (static_cast<int>(x.size()) - kStoiFrame) / kStoiHop + 1;
    frames.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> f(kStoiFrame);
        for (int k = 0; k < kStoiFrame; ++k)
            f[k] = w[k] * x[static_cast<std::size_t>(i) * kStoiHop + k];
        frames.push_back(std::move(f));
    }
    return frames;
}

// drops frames whose clean energy is more than 40 dB below the loudest one,
// then overlap-adds the kept windowed frames back into signals
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
    auto w = stoi_window();
    auto xf = frame_signal(x, w);
    auto yf = frame_signal(y, w);
    if (xf.empty()) {
        x.clear();
        y.clear();
        return;
    }
    std::vector<double> energy(xf.size());
    double peak = -1e300;
    for (std::size_t i = 0; i < xf.size(); ++i) {
        double s = 0.0;
        for (double v : xf[i]) s += v * v;
        energy[i] = 20.0 * std::log10(std::sqrt(s) + kEps);
        peak = std::max(peak, energy[i]);
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < xf.size(); ++i)
        if (energy[i] > peak - kStoiDynRange) keep.push_back(i);

    std::size_t out_len =
        keep.empty() ? 0 : (keep.size() - 1) * kStoiHop + kStoiFrame;
    std::vector<double> xs(out_len, 0.0), ys(out_len, 0.0);
    for (std::size_t j = 0; j < keep.size(); ++j)
        for (int k = 0; k < kStoiFrame; ++k) {
            xs[j * kStoiHop + k] += xf[keep[j]][k];
            ys[j * kStoiHop + k] += yf[keep[j]][k];
        }
    x = std::move(xs);
    y = std::move(ys);
}

void fft_radix2(std::vector<std::complex<double>>& a) {
    int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * M_PI / len;
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> wc(1.0);
            for (int k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * wc;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                wc *= wl;
            }
        }
    }
}

// [frames x 15] one-third-octave band magnitudes
std::vector<std::vector<double>> band_spectra(const std::vector<double>& x) {
    auto w = stoi_window();
    auto frames = frame_signal(x, w);
    // nearest-bin band edges on the 512-point grid
    int bins = kStoiFft / 2 + 1;
    std::vector<int> lo(kStoiBands), hi(kStoiBands);
    for (int b = 0; b < kStoiBands; ++b) {
        double cf = kStoiBandStart * std::pow(2.0, b / 3.0);
        double fl = cf / std::pow(2.0, 1.0 / 6.0);
        double fh = cf * std::pow(2.0, 1.0 / 6.0);
        auto nearest = [&](double f) {
            int best = 0;
            double bd = 1e300;
            for (int i = 0; i < bins; ++i) {
                double fi = static_cast<double>(i) * kStoiRate / kStoiFft;
                double d = (fi - f) * (fi - f);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            return best;
        };
        lo[b] = nearest(fl);
        hi[b] = nearest(fh);
    }

    std::vector<std::vector<double>> out;
    out.reserve(frames.size());
    std::vector<std::complex<double>> buf(kStoiFft);
    for (const auto& f : frames) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
        for (int k = 0; k < kStoiFrame; ++k) buf[k] = f[k];
        fft_radix2(buf);
        std::vector<double> bands(kStoiBands, 0.0);
        for (int b = 0; b < kStoiBands; ++b) {
            double s = 0.0;
            for (int i = lo[b]; i < hi[b]; ++i) s += std::norm(buf[i]);
            bands[b] = std::sqrt(s);
        }
        out.push_back(std::move(bands));
    }
    return out;
}

struct Prepared {
    std::vector<std::vector<double>> x, y;  // [frames x bands]
};

Prepared prepare(const AudioClip& clean, const AudioClip& degraded) {
    if (clean.samples.size() != degraded.samples.size())
        throw InvalidArgument("stoi: inputs must have equal lengths");
    AudioClip c = clean.sample_rate == kStoiRate
                      ? clean
                      : dsp::resample(clean, kStoiRate);
    AudioClip d = degraded.sample_rate == kStoiRate
                      ? degraded
                      : dsp::resample(degraded, kStoiRate);
    std::vector<double> x(c.samples.begin(), c.samples.end());
    std::vector<double> y(d.samples.begin(), d.samples.end());
    remove_silent_frames(x, y);
    Prepared p;
    p.x = band_spectra(x);
    p.y = band_spectra(y);
    if (static_cast<int>(p.x.size()) < kStoiSegFrames)
        throw InsufficientLength(
            "stoi: fewer than 30 active frames (need >= 384 ms of speech)");
    return p;
}

}  // namespace

Real stoi(const AudioClip& clean, const AudioClip& degraded) {
    Prepared p = prepare(clean, degraded);
    int frames = static_cast<int>(p.x.size());
    const double clip = std::pow(10.0, -kStoiBeta / 20.0);
    double total = 0.0;
    long count = 0;
    std::vector<double> xs(kStoiSegFrames), ys(kStoiSegFrames);
    for (int m = kStoiSegFrames; m <= frames; ++m) {
        for (int b = 0; b < kStoiBands; ++b) {
            double nx = 0.0, ny = 0.0;
            for (int n = 0; n < kStoiSegFrames; ++n) {
                xs[n] = p.x[m - kStoiSegFrames + n][b];
                ys[n] = p.y[m - kStoiSegFrames + n][b];
                nx += xs[n] * xs[n];
                ny += ys[n] * ys[n];
            }
            double alpha = std::sqrt(nx) / (std::sqrt(ny) + kEps);
            double mx = 0.0, my = 0.0;
            for (int n = 0; n < kStoiSegFrames; ++n) {
                ys[n] = std::min(alpha * ys[n], xs[n] * (1.0 + clip));
                mx += xs[n];
                my += ys[n];
            }
            mx /= kStoiSegFrames;
            my /= kStoiSegFrames;
            double sx = 0.0, sy = 0.0, dot = 0.0;
            for (int n = 0; n < kStoiSegFrames; ++n) {
                double a = xs[n] - mx, c = ys[n] - my;
                sx += a * a;
                sy += c * c;
                dot += a * c;
            }
            total += dot / (std::sqrt(sx) * std::sqrt(sy) + kEps);
            ++count;
        }
    }
    return total / count;
}

namespace {

// subtract the mean and scale to unit norm along rows, then along columns
void row_col_normalize(std::vector<std::vector<double>>& seg) {
    int rows = static_cast<int>(seg.size());
    int cols = static_cast<int>(seg[0].size());
    for (int r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (double v : seg[r]) mu += v;
        mu /= cols;
        double nrm = 0.0;
        for (double& v : seg[r]) {
            v -= mu;
            nrm += v * v;
        }
        nrm = std::sqrt(nrm) + kEps;
        for (double& v : seg[r]) v /= nrm;
    }
    for (int c = 0; c < cols; ++c) {
        double mu = 0.0;
        for (int r = 0; r < rows; ++r) mu += seg[r][c];
        mu /= rows;
        double nrm = 0.0;
        for (int r = 0; r < rows; ++r) {
            seg[r][c] -= mu;
            nrm += seg[r][c] * seg[r][c];
        }
        nrm = std::sqrt(nrm) + kEps;
        for (int r = 0; r < rows; ++r) seg[r][c] /= nrm;
    }
}

}  // namespace

Real estoi(const AudioClip& clean, const AudioClip& degraded) {
    Prepared p = prepare(clean, degraded);
    int frames = static_cast<int>(p.x.size());
    double total = 0.0;
    int segments = 0;
    for (int m = kStoiSegFrames; m <= frames; ++m) {
        // [bands x seg_frames] blocks
        std::vector<std::vector<double>> xs(kStoiBands), ys(kStoiBands);
        for (int b = 0; b < kStoiBands; ++b) {
            xs[b].resize(kStoiSegFrames);
            ys[b].resize(kStoiSegFrames);
            for (int n = 0; n < kStoiSegFrames; ++n) {
                xs[b][n] = p.x[m - kStoiSegFrames + n][b];
                ys[b][n] = p.y[m - kStoiSegFrames + n][b];
            }
        }
        row_col_normalize(xs);
        row_col_normalize(ys);
        double d = 0.0;
        for (int b = 0; b < kStoiBands; ++b)
            for (int n = 0; n < kStoiSegFrames; ++n) d += xs[b][n] * ys[b][n];
        total += d / kStoiSegFrames;
        ++segments;
    }
    return total / segments;
}

}  // namespace vts::eval
