#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vts/blocks.hpp"
#include "vts/dsp.hpp"
#include "vts/tensor.hpp"

namespace vts::models {

using blocks::Modality;
using blocks::Mode;
using blocks::NamedTensors;
using nn::Tensor;

inline constexpr int kVideoFps = 25;
inline constexpr int kSamplesPerFeature = 960;  // 24000 / 25

enum class Family { v2a_wave, a2a_wave, v2a_mel, a2a_mel };
enum class MelSize { vs, s, m };  // B = 2, 6, 12
enum class IdentityKind { none, speaker256, face4096 };

int mel_blocks(MelSize size);

struct ModelConfig {
    Family family = Family::a2a_wave;
    MelSize size = MelSize::vs;
    IdentityKind identity = IdentityKind::none;
    double width = 1.0;
    std::uint64_t seed = 0;
};

// "v2a-wave", "a2a-wave", "v2a-mel-{vs,s,m}", "a2a-mel-{vs,s,m}"
ModelConfig parse_family(const std::string& name);
std::string family_name(const ModelConfig& cfg);
IdentityKind parse_identity(const std::string& name);

// width-scaled channel count (>= 1, strides untouched)
int scaled(int channels, double width);

// Deterministic pseudo-random unit-norm embedding keyed by speaker id.
Tensor identity_embedding(IdentityKind kind, const std::string& speaker_id);

// ---- submodules ------------------------------------------------------------

struct VideoFramesEncoder {
    blocks::Conv3d stem;
    blocks::DualStatBatchNorm bn_stem;
    Tensor prelu_stem;
    std::vector<blocks::ResidualStack2d> stacks;
    std::vector<Tensor> stack_prelu;
    int out_dim = 512;
    VideoFramesEncoder() = default;
    VideoFramesEncoder(double width, Rng& rng);
    // items [N x 3 x H x W] at 25 fps -> [N x out_dim]
    std::vector<Tensor> forward(const std::vector<Tensor>& items, Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct FaceProjection {
    blocks::Linear l1, l2;
    Tensor prelu;
    FaceProjection() = default;
    FaceProjection(double width, Rng& rng);
    Tensor forward(const Tensor& emb) const;  // [1 x 4096] -> [1 x 512w]
    void collect(const std::string& prefix, NamedTensors& out);
};

// Concatenates the identity vector at every timestep; face embeddings are
// projected first.
struct IdentityEncoder {
    IdentityKind kind = IdentityKind::none;
    FaceProjection face;
    IdentityEncoder() = default;
    IdentityEncoder(IdentityKind kind, double width, Rng& rng);
    int out_dim(int visual_dim) const;
    Tensor forward(const Tensor& visual, const Tensor& emb) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

struct WaveDecoder {
    blocks::Conv1d conv_in;
    blocks::DualStatBatchNorm bn_in;
    std::vector<blocks::ConvT1d> up;
    std::vector<blocks::DualStatBatchNorm> bn_up;
    std::vector<blocks::ResidualStack1d> stacks;  // two per stage
    blocks::Conv1d conv_out;
    WaveDecoder() = default;
    WaveDecoder(double width, Rng& rng);
    // items [N x 512w] -> audio [960N]
    std::vector<Tensor> forward(const std::vector<Tensor>& items, Modality tag,
                                Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct WaveEncoder {
    blocks::ConvT1d conv_in;
    blocks::DualStatBatchNorm bn_in;
    std::vector<blocks::ResidualStack1d> stacks;  // one per stage
    std::vector<blocks::Conv1d> down;
    std::vector<blocks::DualStatBatchNorm> bn_down;
    blocks::ConvT1d conv_out;
    WaveEncoder() = default;
    WaveEncoder(double width, Rng& rng);
    // items [960N] -> [N x 512w]
    std::vector<Tensor> forward(const std::vector<Tensor>& items, Modality tag,
                                Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct WaveTemporalV2A {
    blocks::BiLstm lstm;  // 2 layers -> 512w
    WaveTemporalV2A() = default;
    WaveTemporalV2A(int in_dim, double width, Rng& rng);
    Tensor forward(const Tensor& z) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

struct WaveTemporalA2A {
    blocks::BiLstm down, upw;  // 512w -> 256w -> 512w
    WaveTemporalA2A() = default;
    WaveTemporalA2A(double width, Rng& rng);
    Tensor forward(const Tensor& z) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

struct MelTemporalV2A {
    blocks::BiLstm pre, post;  // -> 768w at 80 Hz
    MelTemporalV2A() = default;
    MelTemporalV2A(int in_dim, double width, Rng& rng);
    Tensor forward(const Tensor& z) const;  // [N x in] 25 Hz -> [T' x 768w]
    void collect(const std::string& prefix, NamedTensors& out);
};

struct MelTemporalA2A {
    blocks::BiLstm pre, post;
    MelTemporalA2A() = default;
    MelTemporalA2A(double width, Rng& rng);
    Tensor forward(const Tensor& z) const;  // [T x 64w] 80 Hz -> [T x 768w]
    void collect(const std::string& prefix, NamedTensors& out);
};

// Linear D_I -> 256 + dropout -> B conformer blocks -> linear 256 -> D_O.
struct ConformerStack {
    blocks::Linear in, out;
    std::vector<blocks::ConformerBlock> cblocks;
    Real dropout = 0.1;
    ConformerStack() = default;
    ConformerStack(int d_in, int d_out, int b, double width, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& items, Modality tag,
                                Mode mode, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct ScaleDiscriminator {
    std::vector<blocks::Conv1d> convs;  // all weight-normed
    ScaleDiscriminator() = default;
    ScaleDiscriminator(double width, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [1 x T] -> score map
    void collect(const std::string& prefix, NamedTensors& out);
};

struct MultiScaleDiscriminator {
    std::vector<ScaleDiscriminator> scales;  // 3
    MultiScaleDiscriminator() = default;
    MultiScaleDiscriminator(double width, Rng& rng);
    // x: audio [24000] -> 3 score maps
    std::vector<Tensor> forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

// ---- assembled graphs ------------------------------------------------------

// Roles: E_V video encoder, E_I identity encoder, T_V / T_A temporal
// modules, F shared decoder, D discriminator, E_A audio encoder.
struct ModelGraph {
    ModelConfig cfg;
    Rng dropout_rng{0};

    std::unique_ptr<VideoFramesEncoder> video_enc;   // E_V
    std::unique_ptr<IdentityEncoder> id_enc;         // E_I
    std::unique_ptr<WaveTemporalV2A> wave_t_v;       // T_V (wave)
    std::unique_ptr<WaveTemporalA2A> wave_t_a;       // T_A (wave)
    std::unique_ptr<MelTemporalV2A> mel_t_v;         // T_V (mel)
    std::unique_ptr<MelTemporalA2A> mel_t_a;         // T_A (mel)
    std::unique_ptr<WaveDecoder> wave_dec;           // F (wave)
    std::unique_ptr<ConformerStack> mel_dec;         // F (mel)
    std::unique_ptr<WaveEncoder> wave_enc;           // E_A (wave)
    std::unique_ptr<ConformerStack> mel_enc;         // E_A (mel)
    std::unique_ptr<MultiScaleDiscriminator> disc;   // D

    NamedTensors named();
    // learned parameters under the given role prefixes ("" = all)
    std::vector<Tensor> params(const std::vector<std::string>& roles = {});

    // V2A: video items [N x 3 x H x W] + per-item identity embeddings.
    // Wave families return audio [960N]; mel families return [T' x 80].
    std::vector<Tensor> generate_from_video(const std::vector<Tensor>& video,
                                            const std::vector<Tensor>& ids,
                                            Mode mode);
    // A2A: wave families take audio [960N]; mel families take [T x 80].
    std::vector<Tensor> generate_from_audio(const std::vector<Tensor>& inputs,
                                            Mode mode,
                                            Modality tag = Modality::audio);
};

ModelGraph build_model(const ModelConfig& cfg);

// Zero-pads [T] audio to the next multiple of 960; returns pad length.
Tensor pad_to_block(const Tensor& audio, int* pad_len);

}  // namespace vts::models
