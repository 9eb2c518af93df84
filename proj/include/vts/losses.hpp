#pragma once

#include <vector>

#include "vts/dsp.hpp"
#include "vts/tensor.hpp"

namespace vts::losses {

struct LossWeights {
    Real lambda1 = 1.0;
    Real lambda2 = 80.0;
    Real lambda3 = 15.0;
};

LossWeights default_weights();     // WER-selected preset
LossWeights perceptual_weights();  // (2.5, 1.0, 0.1)

struct StftResolutionSet {
    std::vector<dsp::StftParams> resolutions;
};

// (1024, 120, 600), (2048, 240, 1200), (512, 50, 240).
StftResolutionSet default_resolutions();

// Score maps are arbitrary-shape tensors, one per discriminator scale.
// Reduction: mean within a map, sum over scales.
nn::Tensor lsgan_generator_loss(const std::vector<nn::Tensor>& fake_scores);
nn::Tensor lsgan_discriminator_loss(const std::vector<nn::Tensor>& real_scores,
                                    const std::vector<nn::Tensor>& fake_scores);

// Waveform inputs are 1-D tensors at the pipeline sample rate.
nn::Tensor spectral_convergence(const nn::Tensor& x, const nn::Tensor& x_hat,
                                const dsp::StftParams& params);
nn::Tensor log_stft_magnitude_loss(const nn::Tensor& x, const nn::Tensor& x_hat,
                                   const dsp::StftParams& params);
// L_SC + L_MAG at one resolution.
nn::Tensor single_stft_loss(const nn::Tensor& x, const nn::Tensor& x_hat,
                            const dsp::StftParams& params);
nn::Tensor multi_resolution_stft_loss(const nn::Tensor& x,
                                      const nn::Tensor& x_hat,
                                      const StftResolutionSet& set);

// Mean |MFCC(x) - MFCC(x_hat)|; differentiable, matches dsp::mfcc forward.
nn::Tensor mfcc_loss(const nn::Tensor& x, const nn::Tensor& x_hat);

nn::Tensor wavegan_generator_total(const nn::Tensor& adv,
                                   const nn::Tensor& mrstft,
                                   const nn::Tensor& mfcc,
                                   const LossWeights& w);

nn::Tensor mel_l1_loss(const nn::Tensor& mel, const nn::Tensor& mel_hat);

// Scalar conveniences over concrete signals (no gradients).
Real spectral_convergence(const AudioClip& x, const AudioClip& x_hat,
                          const dsp::StftParams& params);
Real log_stft_magnitude_loss(const AudioClip& x, const AudioClip& x_hat,
                             const dsp::StftParams& params);
Real multi_resolution_stft_loss(const AudioClip& x, const AudioClip& x_hat,
                                const StftResolutionSet& set);
Real mfcc_loss(const AudioClip& x, const AudioClip& x_hat);
Real mel_l1_loss(const dsp::MelSpectrogram& a, const dsp::MelSpectrogram& b);

}  // namespace vts::losses
