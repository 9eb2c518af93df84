#include "vts/losses.hpp"

#include <cmath>

namespace vts::losses {

LossWeights default_weights() { return {1.0, 80.0, 15.0}; }
LossWeights perceptual_weights() { return {2.5, 1.0, 0.1}; }

StftResolutionSet default_resolutions() {
    StftResolutionSet s;
    s.resolutions = {{1024, 120, 600, true},
                     {2048, 240, 1200, true},
                     {512, 50, 240, true}};
    return s;
}

namespace {

nn::StftSpec to_spec(const dsp::StftParams& p) {
    p.validate();
    return {p.fft_size, p.hop_size, p.win_length, p.center_pad};
}

nn::Tensor clip_tensor(const AudioClip& c) {
    std::vector<Real> v(c.samples.begin(), c.samples.end());
    int n = static_cast<int>(v.size());
    return nn::Tensor::from({n}, std::move(v));
}

nn::Tensor frobenius(const nn::Tensor& m) {
    return nn::sqrt_t(nn::sum(nn::square(m)));
}

void check_pair(const nn::Tensor& x, const nn::Tensor& x_hat) {
    if (x.shape() != x_hat.shape())
        throw InvalidArgument("loss: signal shape mismatch");
}

const nn::Tensor& mel_fb_t() {
    static const nn::Tensor fb = [] {
        auto v = dsp::mel_filterbank(dsp::kMelBands, dsp::kFftSize,
                                     dsp::kPipelineSampleRate, dsp::kMelFMin,
                                     dsp::kMelFMax);
        // transposed: [bins x n_mels]
        int bins = dsp::kFftSize / 2 + 1;
        std::vector<Real> t(v.size());
        for (int m = 0; m < dsp::kMelBands; ++m)
            for (int b = 0; b < bins; ++b)
                t[static_cast<long>(b) * dsp::kMelBands + m] =
                    v[static_cast<long>(m) * bins + b];
        return nn::Tensor::from({bins, dsp::kMelBands}, std::move(t));
    }();
    return fb;
}

const nn::Tensor& dct_t() {
    static const nn::Tensor d = [] {
        // orthonormal DCT-II, transposed: [n_mels x n_coeffs]
        std::vector<Real> t(static_cast<long>(dsp::kMelBands) *
                            dsp::kMfccCoeffs);
        for (int m = 0; m < dsp::kMelBands; ++m)
            for (int k = 0; k < dsp::kMfccCoeffs; ++k) {
                double norm = k == 0 ? std::sqrt(1.0 / dsp::kMelBands)
                                     : std::sqrt(2.0 / dsp::kMelBands);
                t[static_cast<long>(m) * dsp::kMfccCoeffs + k] =
                    norm *
                    std::cos(M_PI * k * (2 * m + 1) / (2.0 * dsp::kMelBands));
            }
        return nn::Tensor::from({dsp::kMelBands, dsp::kMfccCoeffs},
                                std::move(t));
    }();
    return d;
}

nn::Tensor mfcc_tensor(const nn::Tensor& x) {
    nn::StftSpec spec{dsp::kFftSize, dsp::kHopSize, dsp::kWinLength, true};
    nn::Tensor mag = nn::stft_magnitude(x, spec);
    nn::Tensor mel = nn::matmul(mag, mel_fb_t());
    nn::Tensor lm = nn::log_t(nn::clamp_min(mel, dsp::kMagnitudeFloor));
    return nn::matmul(lm, dct_t());
}

}  // namespace

nn::Tensor lsgan_generator_loss(const std::vector<nn::Tensor>& fake_scores) {
    if (fake_scores.empty())
        throw InvalidArgument("lsgan_generator_loss: no score maps");
    nn::Tensor total = nn::Tensor::scalar(0.0);
    for (const auto& s : fake_scores)
        total = nn::add(total, nn::mean(nn::square(nn::add_scalar(s, -1.0))));
    return total;
}

nn::Tensor lsgan_discriminator_loss(const std::vector<nn::Tensor>& real_scores,
                                    const std::vector<nn::Tensor>& fake_scores) {
    if (real_scores.empty() || real_scores.size() != fake_scores.size())
        throw InvalidArgument("lsgan_discriminator_loss: need matching lists");
    nn::Tensor total = nn::Tensor::scalar(0.0);
    for (const auto& s : real_scores)
        total = nn::add(total, nn::mean(nn::square(nn::add_scalar(s, -1.0))));
    for (const auto& s : fake_scores)
        total = nn::add(total, nn::mean(nn::square(s)));
    return total;
}

nn::Tensor spectral_convergence(const nn::Tensor& x, const nn::Tensor& x_hat,
                                const dsp::StftParams& params) {
    check_pair(x, x_hat);
    auto spec = to_spec(params);
    nn::Tensor mx = nn::stft_magnitude(x, spec);
    nn::Tensor mh = nn::stft_magnitude(x_hat, spec);
    nn::Tensor ref = frobenius(mx);
    if (ref.item() < 1e-12)
        throw InvalidArgument("spectral_convergence: zero reference signal");
    return nn::divide(frobenius(nn::sub(mx, mh)), ref);
}

nn::Tensor log_stft_magnitude_loss(const nn::Tensor& x, const nn::Tensor& x_hat,
                                   const dsp::StftParams& params) {
    check_pair(x, x_hat);
    auto spec = to_spec(params);
    nn::Tensor lx = nn::log_t(nn::clamp_min(nn::stft_magnitude(x, spec),
                                            dsp::kMagnitudeFloor));
    nn::Tensor lh = nn::log_t(nn::clamp_min(nn::stft_magnitude(x_hat, spec),
                                            dsp::kMagnitudeFloor));
    return nn::mean(nn::abs_t(nn::sub(lx, lh)));
}

nn::Tensor single_stft_loss(const nn::Tensor& x, const nn::Tensor& x_hat,
                            const dsp::StftParams& params) {
    return nn::add(spectral_convergence(x, x_hat, params),
                   log_stft_magnitude_loss(x, x_hat, params));
}

nn::Tensor multi_resolution_stft_loss(const nn::Tensor& x,
                                      const nn::Tensor& x_hat,
                                      const StftResolutionSet& set) {
    if (set.resolutions.empty())
        throw InvalidArgument("multi_resolution_stft_loss: empty set");
    nn::Tensor total = nn::Tensor::scalar(0.0);
    for (const auto& p : set.resolutions)
        total = nn::add(total, single_stft_loss(x, x_hat, p));
    return nn::scale(total, 1.0 / set.resolutions.size());
}

nn::Tensor mfcc_loss(const nn::Tensor& x, const nn::Tensor& x_hat) {
    check_pair(x, x_hat);
    return nn::mean(nn::abs_t(nn::sub(mfcc_tensor(x), mfcc_tensor(x_hat))));
}

nn::Tensor wavegan_generator_total(const nn::Tensor& adv,
                                   const nn::Tensor& mrstft,
                                   const nn::Tensor& mfcc,
                                   const LossWeights& w) {
    if (w.lambda1 < 0 || w.lambda2 < 0 || w.lambda3 < 0)
        throw InvalidArgument("wavegan_generator_total: negative weight");
    return nn::add(nn::add(nn::scale(adv, w.lambda1),
                           nn::scale(mrstft, w.lambda2)),
                   nn::scale(mfcc, w.lambda3));
}

nn::Tensor mel_l1_loss(const nn::Tensor& mel, const nn::Tensor& mel_hat) {
    if (mel.shape() != mel_hat.shape())
        throw InvalidArgument("mel_l1_loss: shape mismatch");
    return nn::mean(nn::abs_t(nn::sub(mel, mel_hat)));
}

Real spectral_convergence(const AudioClip& x, const AudioClip& x_hat,
                          const dsp::StftParams& params) {
    if (x.sample_rate != x_hat.sample_rate)
        throw SampleRateMismatch("spectral_convergence: sample rates differ");
    return spectral_convergence(clip_tensor(x), clip_tensor(x_hat), params)
        .item();
}

Real log_stft_magnitude_loss(const AudioClip& x, const AudioClip& x_hat,
                             const dsp::StftParams& params) {
    return log_stft_magnitude_loss(clip_tensor(x), clip_tensor(x_hat), params)
        .item();
}

Real multi_resolution_stft_loss(const AudioClip& x, const AudioClip& x_hat,
                                const StftResolutionSet& set) {
    return multi_resolution_stft_loss(clip_tensor(x), clip_tensor(x_hat), set)
        .item();
}

Real mfcc_loss(const AudioClip& x, const AudioClip& x_hat) {
    if (x.sample_rate != dsp::kPipelineSampleRate ||
        x_hat.sample_rate != dsp::kPipelineSampleRate)
        throw SampleRateMismatch("mfcc_loss: expected 24 kHz");
    return mfcc_loss(clip_tensor(x), clip_tensor(x_hat)).item();
}

Real mel_l1_loss(const dsp::MelSpectrogram& a, const dsp::MelSpectrogram& b) {
    if (a.frames != b.frames || a.n_mels != b.n_mels)
        throw InvalidArgument("mel_l1_loss: shape mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        acc += std::fabs(a.values[i] - b.values[i]);
    return a.values.empty() ? 0.0 : acc / a.values.size();
}

}  // namespace vts::losses
