#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vts/tensor.hpp"

namespace vts::blocks {

using nn::Tensor;

inline constexpr Real kLeakySlope = 0.2;
inline constexpr Real kPreluInit = 0.25;
inline constexpr Real kBnMomentum = 0.1;
inline constexpr Real kBnEps = 1e-5;

enum class Modality { audio, video };
enum class Mode { train, eval };

// Flat view of a module tree: learned parameters and persistent buffers,
// each under a dotted name. Checkpointing and partial transplants work on
// these names.
struct NamedTensors {
    std::vector<std::pair<std::string, Tensor>> params;
    std::vector<std::pair<std::string, Tensor>> buffers;
};

Tensor* find_named(NamedTensors& nt, const std::string& name);

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_fan_in(nn::Shape shape, long fan_in, Rng& rng);
// Orthogonal rows (QR of a Gaussian matrix).
Tensor init_orthogonal(int rows, int cols, Rng& rng);

struct Linear {
    Tensor w, b;  // [I x O], [O]
    Linear() = default;
    Linear(int in, int out, Rng& rng, bool bias = true);
    Tensor forward(const Tensor& x) const;  // [T x I] -> [T x O]
    void collect(const std::string& prefix, NamedTensors& out);
};

struct Conv1d {
    int stride = 1, pad = 0, dilation = 1, groups = 1;
    bool weight_norm = false;
    Tensor w, b;  // w [Co x Ci/g x K]; when weight-normed, w is the direction
    Tensor g;     // [Co] magnitudes (weight norm only)
    Conv1d() = default;
    Conv1d(int in_c, int out_c, int k, Rng& rng, int stride = 1, int pad = 0,
           int dilation = 1, int groups = 1, bool weight_norm = false);
    Tensor effective_weight() const;
    Tensor forward(const Tensor& x) const;  // [Ci x T] -> [Co x T']
    void collect(const std::string& prefix, NamedTensors& out);
};

struct ConvT1d {
    int stride = 1, pad = 0, output_pad = 0;
    Tensor w, b;  // w [Ci x Co x K]
    ConvT1d() = default;
    ConvT1d(int in_c, int out_c, int k, Rng& rng, int stride, int pad,
            int output_pad = 0);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

struct Conv2d {
    int stride = 1, pad = 0;
    Tensor w, b;  // [Co x Ci x Kh x Kw]
    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, Rng& rng, int stride = 1, int pad = 0);
    Tensor forward(const Tensor& x) const;  // [Ci x H x W]
    void collect(const std::string& prefix, NamedTensors& out);
};

struct Conv3d {
    int stride[3] = {1, 1, 1};
    int pad[3] = {0, 0, 0};
    Tensor w, b;  // [Co x Ci x Kn x Kh x Kw]
    Conv3d() = default;
    Conv3d(int in_c, int out_c, const int k[3], Rng& rng, const int stride[3],
           const int pad[3]);
    Tensor forward(const Tensor& x) const;  // [Ci x N x H x W]
    void collect(const std::string& prefix, NamedTensors& out);
};

// Batch norm with shared gamma/beta and one set of running statistics per
// modality. Train-mode calls normalize by batch statistics and update only
// the tagged modality; eval-mode calls read the tagged modality's stats.
struct DualStatBatchNorm {
    Real momentum = kBnMomentum;
    Real eps = kBnEps;
    Tensor gamma, beta;
    Tensor mean_audio, var_audio, mean_video, var_video;  // buffers [C]
    DualStatBatchNorm() = default;
    explicit DualStatBatchNorm(int channels);
    // Items [C x R_i]; statistics span the whole list.
    std::vector<Tensor> forward(const std::vector<Tensor>& xs, Modality tag,
                                Mode mode);
    Tensor forward1(const Tensor& x, Modality tag, Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

// LReLU -> reflection-pad(D, D) -> conv k3 dilation D + BN + LReLU ->
// conv k1 + BN, summed with a conv k1 + BN skip. Length preserved.
struct ResidualStack1d {
    int dilation = 1;
    Conv1d conv_dil, conv_pw, conv_skip;
    DualStatBatchNorm bn1, bn2, bn_skip;
    ResidualStack1d() = default;
    ResidualStack1d(int channels, int dilation, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& xs, Modality tag,
                                Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

// conv3x3(S) + BN + PReLU -> conv3x3(1) + BN, plus identity skip, or
// conv1x1(S) + BN skip when downsampling.
struct ResidualStack2d {
    bool downsample = false;
    Conv2d conv1, conv2, conv_skip;
    DualStatBatchNorm bn1, bn2, bn_skip;
    Tensor prelu_a;  // [C]
    ResidualStack2d() = default;
    ResidualStack2d(int in_c, int out_c, int stride, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& xs, Modality tag,
                                Mode mode);
    void collect(const std::string& prefix, NamedTensors& out);
};

struct LayerNormP {
    Tensor gamma, beta;
    LayerNormP() = default;
    explicit LayerNormP(int dim);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

struct BiLstm {
    int hidden = 0, layers = 0;
    // per layer, forward then backward direction
    std::vector<Tensor> w_ih, w_hh, b;  // 2*layers entries each
    BiLstm() = default;
    BiLstm(int in_dim, int hidden, int layers, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [T x in] -> [T x 2H]
    void collect(const std::string& prefix, NamedTensors& out);
};

struct ConformerConfig {
    int blocks = 2;
    int dim = 256;
    int heads = 4;
    int conv_kernel = 31;
    int ff_dim = 2048;
    Real dropout = 0.1;
};

struct FeedForward {
    LayerNormP ln;
    Linear in, out;
    FeedForward() = default;
    FeedForward(int dim, int ff_dim, Rng& rng);
    Tensor forward(const Tensor& x, Real dropout, Rng& rng, Mode mode) const;
    void collect(const std::string& prefix, NamedTensors& out);
};

// Half-step FF, rel-pos MHSA, convolution module (with dual-stat BN),
// half-step FF, final LayerNorm.
struct ConformerBlock {
    ConformerConfig cfg;
    FeedForward ff1, ff2;
    LayerNormP ln_attn, ln_conv, ln_final;
    Linear wq, wk, wv, wo, wr;
    Tensor u_bias, v_bias;  // [dim]
    Linear pw1, pw2;        // d -> 2d, d -> d
    Conv1d depthwise;       // k = conv_kernel, groups = dim
    DualStatBatchNorm bn;
    ConformerBlock() = default;
    ConformerBlock(const ConformerConfig& cfg, Rng& rng);
    std::vector<Tensor> forward(const std::vector<Tensor>& xs, Modality tag,
                                Mode mode, Rng& rng);
    Tensor forward1(const Tensor& x, Modality tag, Mode mode, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out);
};

// Nearest-neighbor temporal resampling on [T x D] feature sequences.
std::vector<int> upsample_indices(int t, double src_rate, double dst_rate);
std::vector<int> downsample_indices(int t, double src_rate, double dst_rate);
Tensor nn_time_upsample(const Tensor& x, double src_rate, double dst_rate);
Tensor time_downsample(const Tensor& x, double src_rate, double dst_rate);

}  // namespace vts::blocks
