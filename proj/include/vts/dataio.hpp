#pragma once

#include <string>
#include <vector>

#include "vts/common.hpp"
#include "vts/tensor.hpp"

namespace vts::dataio {

using nn::Tensor;

enum class Split { train, val, test };
enum class Group { clean, noisy };

struct ManifestEntry {
    std::string id;
    std::string speaker_id;
    std::string audio_path;
    std::string video_path;  // empty when the entry is audio-only
    Split split = Split::train;
    Group group = Group::clean;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

// Tab-separated, one entry per line: id, speaker_id, split, group,
// audio_path, video_path ("-" when absent). read verifies unique ids and
// that every referenced path exists.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m);

// ---- audio files -----------------------------------------------------------

// PCM16 (scaled by 1/32768) or 32-bit float; stereo takes the left channel
// and warns on stderr.
AudioClip read_wav(const std::string& path);
// 32-bit float mono; read(write(x)) is bit-identical.
void write_wav(const std::string& path, const AudioClip& audio);

// ---- frame tensor files ----------------------------------------------------

// Little-endian 32-bit floats, header {magic "VTSF", version, N, C, H, W}.
Tensor read_frames(const std::string& path);
void write_frames(const std::string& path, const Tensor& frames);

// ---- synthetic paired data -------------------------------------------------

struct SyntheticPairSpec {
    std::uint64_t seed = 0;
    double duration_s = 1.0;  // multiple of 0.2 s
    int n_sinusoids = 3;
    int height = 32;
    int width = 32;
    std::string speaker_id = "spk0";
};

// Quantized per-segment parameters (16 levels each), row-major
// [segment x sinusoid].
struct SynthParams {
    std::vector<int> freq_q;
    std::vector<int> amp_q;
    int segments = 0;
    int n_sinusoids = 0;
};

SynthParams draw_synth_params(const SyntheticPairSpec& spec);
AudioClip render_synth_audio(const SynthParams& p,
                             const SyntheticPairSpec& spec);
// [N x 3 x H x W] at 25 fps; every frame of a segment renders that segment's
// parameters as block intensities, so the parameters are exactly decodable.
Tensor render_synth_video(const SynthParams& p, const SyntheticPairSpec& spec);
SynthParams decode_synth_video(const Tensor& frames, int n_sinusoids);

struct SynthPair {
    Tensor video;
    AudioClip audio;
};
SynthPair synth_pair(const SyntheticPairSpec& spec);

// Adds seeded white noise at the given SNR (dB) relative to the clip power.
AudioClip add_noise_snr(const AudioClip& clip, double snr_db, Rng& rng);

// ---- batching --------------------------------------------------------------

struct Sample {
    std::string id;
    std::string speaker_id;
    Tensor video;   // [N x 3 x H x W], optional
    AudioClip audio;
    Tensor id_emb;  // optional
};

struct Batch {
    std::vector<Tensor> video;  // per item; empty when no item has video
    std::vector<Tensor> audio;  // [960 * padded_frames]
    std::vector<Tensor> mel;    // log-mel of the padded audio
    std::vector<Tensor> ids;
    std::vector<int> frames;    // payload frames per item (pad mask)
    int padded_frames = 0;
};

// Truncates to max_seconds, right-pads to the batch maximum, keeps the
// N frames <-> 960N samples alignment.
Batch collate(const std::vector<Sample>& samples, double max_seconds = 3.0);

// Single draw per clip; width axis reversed when it fires.
Tensor horizontal_flip_augment(const Tensor& frames, double probability,
                               Rng& rng);

// One shared offset for an aligned pair of 1-D tensors; zero-pads inputs
// shorter than 1 s.
std::pair<Tensor, Tensor> random_1s_crop(const Tensor& real, const Tensor& fake,
                                         Rng& rng);

}  // namespace vts::dataio
