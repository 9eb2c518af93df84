#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "vts/common.hpp"

namespace vts::detail {

// Real-to-complex FFT of power-of-two (or any) size, with cached FFTW plans.
// FFTW planning is not thread-safe; execution on distinct buffers is.
class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        static std::mutex plan_mutex;
        std::lock_guard<std::mutex> lock(plan_mutex);
        fwd_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    int bins() const { return n_ / 2 + 1; }

    // frame must have n_ samples; spectrum gets n_/2+1 complex bins.
    void forward(const double* frame, std::complex<double>* spectrum) {
        for (int i = 0; i < n_; ++i) in_[i] = frame[i];
        fftw_execute(fwd_);
        for (int i = 0; i < bins(); ++i)
            spectrum[i] = {out_[i][0], out_[i][1]};
    }

    // Inverse of forward; FFTW's c2r is unnormalized, we divide by n here.
    void inverse(const std::complex<double>* spectrum, double* frame) {
        for (int i = 0; i < bins(); ++i) {
            out_[i][0] = spectrum[i].real();
            out_[i][1] = spectrum[i].imag();
        }
        fftw_execute(inv_);
        for (int i = 0; i < n_; ++i) frame[i] = in_[i] / n_;
    }

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan fwd_;
    fftw_plan inv_;
};

}  // namespace vts::detail
