#include <cmath>

#include "vts/dataio.hpp"
#include "vts/dsp.hpp"

namespace vts::dataio {

namespace {

constexpr int kLevels = 16;
constexpr double kSegmentSeconds = 0.2;
constexpr int kFramesPerSegment = 5;   // 25 fps
constexpr double kBaseFreq = 150.0;    // level q -> 150 * (q + 1) Hz

void validate(const SyntheticPairSpec& spec) {
    double segs = spec.duration_s / kSegmentSeconds;
    if (spec.duration_s <= 0.0 ||
        std::fabs(segs - std::lround(segs)) > 1e-9)
        throw InvalidArgument("synth: duration must be a multiple of 0.2 s");
    if (spec.height < 16 || spec.width < 16)
        throw InvalidArgument("synth: frame size must be at least 16x16");
    if (spec.n_sinusoids < 1 || spec.n_sinusoids > spec.height)
        throw InvalidArgument("synth: bad sinusoid count");
}

struct Timbre {
    double harmonic;               // second-harmonic amplitude ratio
    std::vector<double> phase;     // per sinusoid
};

Timbre speaker_timbre(const std::string& speaker_id, int n_sinusoids) {
    Rng rng(fnv1a(speaker_id));
    Timbre t;
    t.harmonic = rng.uniform(0.1, 0.5);
    for (int k = 0; k < n_sinusoids; ++k)
        t.phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
    return t;
}

}  // namespace

SynthParams draw_synth_params(const SyntheticPairSpec& spec) {
    validate(spec);
    SynthParams p;
    p.segments = static_cast<int>(std::lround(spec.duration_s /
                                              kSegmentSeconds));
    p.n_sinusoids = spec.n_sinusoids;
    Rng rng(spec.seed);
    for (int s = 0; s < p.segments; ++s)
        for (int k = 0; k < p.n_sinusoids; ++k) {
            p.freq_q.push_back(static_cast<int>(rng.below(kLevels)));
            p.amp_q.push_back(static_cast<int>(rng.below(kLevels)));
        }
    return p;
}

AudioClip render_synth_audio(const SynthParams& p,
                             const SyntheticPairSpec& spec) {
    Timbre timbre = speaker_timbre(spec.speaker_id, p.n_sinusoids);
    int seg_samples =
        static_cast<int>(kSegmentSeconds * dsp::kPipelineSampleRate);
    AudioClip clip;
    clip.sample_rate = dsp::kPipelineSampleRate;
    clip.samples.resize(static_cast<std::size_t>(p.segments) * seg_samples);
    double norm = 1.0 / (1.0 + timbre.harmonic);
    for (int s = 0; s < p.segments; ++s)
        for (int k = 0; k < p.n_sinusoids; ++k) {
            long base = static_cast<long>(s) * p.n_sinusoids + k;
            double f = kBaseFreq * (p.freq_q[base] + 1);
            double a = (p.amp_q[base] + 1) /
                       (static_cast<double>(kLevels) * p.n_sinusoids);
            for (int i = 0; i < seg_samples; ++i) {
                double t = static_cast<double>(i) / clip.sample_rate;
                double w = 2.0 * M_PI * f * t + timbre.phase[k];
                clip.samples[static_cast<long>(s) * seg_samples + i] +=
                    static_cast<float>(a * norm *
                                       (std::sin(w) +
                                        timbre.harmonic * std::sin(2.0 * w)));
            }
        }
    return clip;
}

Tensor render_synth_video(const SynthParams& p,
                          const SyntheticPairSpec& spec) {
    int n = p.segments * kFramesPerSegment;
    int h = spec.height, w = spec.width;
    Tensor video = Tensor::zeros({n, 3, h, w});
    long hw = static_cast<long>(h) * w;
    for (int s = 0; s < p.segments; ++s) {
        for (int fr = 0; fr < kFramesPerSegment; ++fr) {
            long frame = (static_cast<long>(s) * kFramesPerSegment + fr) * 3 *
                         hw;
            for (int k = 0; k < p.n_sinusoids; ++k) {
                long base = static_cast<long>(s) * p.n_sinusoids + k;
                double fv = p.freq_q[base] / double(kLevels - 1);
                double av = p.amp_q[base] / double(kLevels - 1);
                int r0 = k * h / p.n_sinusoids;
                int r1 = (k + 1) * h / p.n_sinusoids;
                for (int r = r0; r < r1; ++r)
                    for (int c = 0; c < w; ++c) {
                        double v = c < w / 2 ? fv : av;
                        for (int ch = 0; ch < 3; ++ch)
                            video.val()[frame + ch * hw + r * w + c] = v;
                    }
            }
        }
    }
    return video;
}

SynthParams decode_synth_video(const Tensor& frames, int n_sinusoids) {
    if (frames.shape().size() != 4 || frames.dim(1) != 3)
        throw InvalidArgument("decode: expected [N x 3 x H x W]");
    int n = frames.dim(0), h = frames.dim(2), w = frames.dim(3);
    if (n % kFramesPerSegment != 0)
        throw InvalidArgument("decode: frame count not a segment multiple");
    SynthParams p;
    p.segments = n / kFramesPerSegment;
    p.n_sinusoids = n_sinusoids;
    long hw = static_cast<long>(h) * w;
    for (int s = 0; s < p.segments; ++s) {
        long frame = static_cast<long>(s) * kFramesPerSegment * 3 * hw;
        for (int k = 0; k < n_sinusoids; ++k) {
            int r = (k * h / n_sinusoids + (k + 1) * h / n_sinusoids) / 2;
            double fv = frames.val()[frame + r * w + w / 4];
            double av = frames.val()[frame + r * w + w / 2 + w / 4];
            p.freq_q.push_back(
                static_cast<int>(std::lround(fv * (kLevels - 1))));
            p.amp_q.push_back(
                static_cast<int>(std::lround(av * (kLevels - 1))));
        }
    }
    return p;
}

SynthPair synth_pair(const SyntheticPairSpec& spec) {
    SynthParams p = draw_synth_params(spec);
    return {render_synth_video(p, spec), render_synth_audio(p, spec)};
}

AudioClip add_noise_snr(const AudioClip& clip, double snr_db, Rng& rng) {
    double power = 0.0;
    for (float s : clip.samples) power += static_cast<double>(s) * s;
    power /= std::max<std::size_t>(1, clip.samples.size());
    double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    AudioClip out = clip;
    for (auto& s : out.samples)
        s += static_cast<float>(rng.normal(0.0, noise_std));
    return out;
}

}  // namespace vts::dataio
