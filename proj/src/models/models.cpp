#include "vts/models.hpp"

#include <cmath>

namespace vts::models {

using namespace vts::blocks;

int mel_blocks(MelSize size) {
    switch (size) {
        case MelSize::vs: return 2;
        case MelSize::s: return 6;
        case MelSize::m: return 12;
    }
    throw InvalidArgument("mel_blocks: bad size");
}

ModelConfig parse_family(const std::string& name) {
    ModelConfig cfg;
    if (name == "v2a-wave") {
        cfg.family = Family::v2a_wave;
    } else if (name == "a2a-wave") {
        cfg.family = Family::a2a_wave;
    } else if (name.rfind("v2a-mel-", 0) == 0 || name.rfind("a2a-mel-", 0) == 0) {
        cfg.family = name[0] == 'v' ? Family::v2a_mel : Family::a2a_mel;
        std::string suffix = name.substr(8);
        if (suffix == "vs") cfg.size = MelSize::vs;
        else if (suffix == "s") cfg.size = MelSize::s;
        else if (suffix == "m") cfg.size = MelSize::m;
        else throw InvalidArgument("unknown model family: " + name);
    } else {
        throw InvalidArgument("unknown model family: " + name);
    }
    return cfg;
}

std::string family_name(const ModelConfig& cfg) {
    switch (cfg.family) {
        case Family::v2a_wave: return "v2a-wave";
        case Family::a2a_wave: return "a2a-wave";
        case Family::v2a_mel:
        case Family::a2a_mel: {
            std::string base =
                cfg.family == Family::v2a_mel ? "v2a-mel-" : "a2a-mel-";
            switch (cfg.size) {
                case MelSize::vs: return base + "vs";
                case MelSize::s: return base + "s";
                case MelSize::m: return base + "m";
            }
        }
    }
    throw InvalidArgument("family_name: bad config");
}

IdentityKind parse_identity(const std::string& name) {
    if (name == "none") return IdentityKind::none;
    if (name == "speaker256") return IdentityKind::speaker256;
    if (name == "face4096") return IdentityKind::face4096;
    throw InvalidArgument("unknown identity kind: " + name);
}

int scaled(int channels, double width) {
    return std::max(1, static_cast<int>(std::lround(channels * width)));
}

Tensor identity_embedding(IdentityKind kind, const std::string& speaker_id) {
    if (kind == IdentityKind::none) return Tensor();
    int d = kind == IdentityKind::speaker256 ? 256 : 4096;
    Rng rng(fnv1a(speaker_id));
    Tensor e = Tensor::zeros({1, d});
    Real norm = 0;
    for (auto& v : e.val()) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : e.val()) v /= norm;
    return e;
}

namespace {

// largest common divisor of both channel counts not exceeding `want`
int fit_groups(int want, int in_c, int out_c) {
    for (int g = std::min({want, in_c, out_c}); g >= 1; --g)
        if (in_c % g == 0 && out_c % g == 0) return g;
    return 1;
}

// [N x C x H x W] -> [C x N x H x W]
Tensor to_cnhw(const Tensor& x) {
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    long hw = static_cast<long>(H) * W;
    Tensor out = nn::make_op({C, N, H, W}, {x}, [N, C, hw](nn::Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int a = 0; a < N; ++a)
            for (int c = 0; c < C; ++c)
                for (long i = 0; i < hw; ++i)
                    p.grad[(a * C + c) * hw + i] +=
                        n.grad[(static_cast<long>(c) * N + a) * hw + i];
    });
    for (int a = 0; a < N; ++a)
        for (int c = 0; c < C; ++c)
            for (long i = 0; i < hw; ++i)
                out.val()[(static_cast<long>(c) * N + a) * hw + i] =
                    x.val()[(a * C + c) * hw + i];
    return out;
}

// frame t of [C x N x H x W] -> [C x H x W]
Tensor frame_at(const Tensor& x, int t) {
    int C = x.dim(0), N = x.dim(1), H = x.dim(2), W = x.dim(3);
    long hw = static_cast<long>(H) * W;
    Tensor out = nn::make_op({C, H, W}, {x}, [C, N, t, hw](nn::Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (long i = 0; i < hw; ++i)
                p.grad[(static_cast<long>(c) * N + t) * hw + i] +=
                    n.grad[c * hw + i];
    });
    for (int c = 0; c < C; ++c)
        for (long i = 0; i < hw; ++i)
            out.val()[c * hw + i] =
                x.val()[(static_cast<long>(c) * N + t) * hw + i];
    return out;
}

}  // namespace

// ---- video frames encoder --------------------------------------------------

VideoFramesEncoder::VideoFramesEncoder(double width, Rng& rng) {
    int c64 = scaled(64, width), c128 = scaled(128, width);
    int c256 = scaled(256, width), c512 = scaled(512, width);
    const int k[3] = {5, 7, 7}, s[3] = {1, 2, 2}, p[3] = {2, 3, 3};
    stem = Conv3d(3, c64, k, rng, s, p);
    bn_stem = DualStatBatchNorm(c64);
    prelu_stem = Tensor::full({c64}, kPreluInit, true);

    auto add_stage = [&](int in_c, int out_c, int stride, int count) {
        stacks.emplace_back(in_c, out_c, stride, rng);
        stack_prelu.push_back(Tensor::full({out_c}, kPreluInit, true));
        for (int i = 1; i < count; ++i) {
            stacks.emplace_back(out_c, out_c, 1, rng);
            stack_prelu.push_back(Tensor::full({out_c}, kPreluInit, true));
        }
    };
    add_stage(c64, c64, 1, 4);
    add_stage(c64, c128, 2, 4);
    add_stage(c128, c256, 2, 4);
    add_stage(c256, c512, 2, 4);
    out_dim = c512;
}

std::vector<Tensor> VideoFramesEncoder::forward(
    const std::vector<Tensor>& items, Mode mode) {
    if (items.empty()) throw InvalidArgument("video encoder: empty batch");
    std::vector<Tensor> stems;
    std::vector<int> frames;
    for (const auto& item : items) {
        if (item.shape().size() != 4 || item.dim(0) < 1 || item.dim(1) != 3)
            throw InvalidArgument("video encoder: expected [N x 3 x H x W]");
        frames.push_back(item.dim(0));
        stems.push_back(stem.forward(to_cnhw(item)));
    }
    stems = bn_stem.forward(stems, Modality::video, mode);

    // flatten every frame of every item; BN statistics span the lot
    std::vector<Tensor> flat;
    const int pk[3] = {1, 3, 3}, ps[3] = {1, 2, 2}, pp[3] = {0, 1, 1};
    for (std::size_t i = 0; i < stems.size(); ++i) {
        Tensor h = nn::max_pool3d(nn::prelu_channels(stems[i], prelu_stem),
                                  pk, ps, pp);
        for (int t = 0; t < frames[i]; ++t) flat.push_back(frame_at(h, t));
    }
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        flat = stacks[s].forward(flat, Modality::video, mode);
        for (auto& f : flat) f = nn::prelu_channels(f, stack_prelu[s]);
    }

    std::vector<Tensor> out;
    std::size_t pos = 0;
    for (int n : frames) {
        std::vector<Tensor> rows;
        for (int t = 0; t < n; ++t)
            rows.push_back(nn::reshape(nn::adaptive_avg_pool_hw(flat[pos++]),
                                       {1, out_dim}));
        out.push_back(nn::concat_rows(rows));
    }
    return out;
}

void VideoFramesEncoder::collect(const std::string& prefix, NamedTensors& out) {
    stem.collect(prefix + "stem.", out);
    bn_stem.collect(prefix + "bn_stem.", out);
    out.params.emplace_back(prefix + "prelu_stem", prelu_stem);
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        std::string p = prefix + "stack" + std::to_string(i) + ".";
        stacks[i].collect(p, out);
        out.params.emplace_back(p + "prelu_out", stack_prelu[i]);
    }
}

// ---- identity --------------------------------------------------------------

FaceProjection::FaceProjection(double width, Rng& rng)
    : l1(4096, scaled(1024, width), rng), l2(scaled(1024, width),
                                            scaled(512, width), rng) {
    prelu = Tensor::full({1}, kPreluInit, true);
}

Tensor FaceProjection::forward(const Tensor& emb) const {
    // one shared PReLU slope; [1 x H] has a single leading channel
    return l2.forward(nn::prelu_channels(l1.forward(emb), prelu));
}

void FaceProjection::collect(const std::string& prefix, NamedTensors& out) {
    l1.collect(prefix + "l1.", out);
    l2.collect(prefix + "l2.", out);
    out.params.emplace_back(prefix + "prelu", prelu);
}

IdentityEncoder::IdentityEncoder(IdentityKind kind_, double width, Rng& rng)
    : kind(kind_) {
    if (kind == IdentityKind::face4096) face = FaceProjection(width, rng);
}

int IdentityEncoder::out_dim(int visual_dim) const {
    switch (kind) {
        case IdentityKind::none: return visual_dim;
        case IdentityKind::speaker256: return visual_dim + 256;
        case IdentityKind::face4096:
            return visual_dim + face.l2.w.dim(1);
    }
    throw InvalidArgument("identity: unknown kind");
}

Tensor IdentityEncoder::forward(const Tensor& visual, const Tensor& emb) const {
    if (kind == IdentityKind::none) return visual;
    if (!emb.defined() || emb.shape().size() != 2 || emb.dim(0) != 1)
        throw InvalidArgument("identity: expected a [1 x D] embedding");
    int want = kind == IdentityKind::speaker256 ? 256 : 4096;
    if (emb.dim(1) != want)
        throw InvalidArgument("identity: embedding size does not match kind");
    Tensor row = kind == IdentityKind::face4096 ? face.forward(emb) : emb;
    std::vector<int> idx(visual.dim(0), 0);
    return nn::concat_cols({visual, nn::gather_rows(row, idx)});
}

void IdentityEncoder::collect(const std::string& prefix, NamedTensors& out) {
    if (kind == IdentityKind::face4096) face.collect(prefix + "face.", out);
}

// ---- raw waveform decoder / encoder ----------------------------------------

WaveDecoder::WaveDecoder(double width, Rng& rng) {
    int cin = scaled(512, width);
    int wide = scaled(2048, width);
    int ch[5] = {scaled(1024, width), scaled(512, width), scaled(256, width),
                 scaled(128, width), scaled(64, width)};
    const int k[5] = {10, 8, 8, 8, 6};
    const int s[5] = {5, 4, 4, 4, 3};
    const int p[5] = {3, 2, 2, 2, 2};
    const int op[5] = {1, 0, 0, 0, 1};
    conv_in = Conv1d(cin, wide, 7, rng);
    bn_in = DualStatBatchNorm(wide);
    int prev = wide;
    for (int i = 0; i < 5; ++i) {
        up.emplace_back(prev, ch[i], k[i], rng, s[i], p[i], op[i]);
        bn_up.emplace_back(ch[i]);
        stacks.emplace_back(ch[i], 1, rng);
        stacks.emplace_back(ch[i], 3, rng);
        prev = ch[i];
    }
    conv_out = Conv1d(prev, 1, 7, rng);
}

std::vector<Tensor> WaveDecoder::forward(const std::vector<Tensor>& items,
                                         Modality tag, Mode mode) {
    std::vector<Tensor> h;
    h.reserve(items.size());
    for (const auto& z : items) {
        if (z.shape().size() != 2 || z.dim(0) < 1)
            throw InvalidArgument("wave decoder: expected [N x D] features");
        h.push_back(conv_in.forward(
            nn::reflection_pad1d(nn::transpose2d(z), 3, 3)));
    }
    h = bn_in.forward(h, tag, mode);
    for (int i = 0; i < 5; ++i) {
        for (auto& x : h) x = up[i].forward(nn::leaky_relu(x, kLeakySlope));
        h = bn_up[i].forward(h, tag, mode);
        h = stacks[2 * i].forward(h, tag, mode);
        h = stacks[2 * i + 1].forward(h, tag, mode);
    }
    std::vector<Tensor> out;
    out.reserve(h.size());
    for (auto& x : h) {
        Tensor y = conv_out.forward(nn::reflection_pad1d(
            nn::leaky_relu(x, kLeakySlope), 3, 3));
        out.push_back(nn::tanh_t(nn::reshape(y, {y.dim(1)})));
    }
    return out;
}

void WaveDecoder::collect(const std::string& prefix, NamedTensors& out) {
    conv_in.collect(prefix + "conv_in.", out);
    bn_in.collect(prefix + "bn_in.", out);
    for (int i = 0; i < 5; ++i) {
        std::string sp = prefix + "up" + std::to_string(i) + ".";
        up[i].collect(sp, out);
        bn_up[i].collect(sp + "bn.", out);
        stacks[2 * i].collect(sp + "rs1.", out);
        stacks[2 * i + 1].collect(sp + "rs3.", out);
    }
    conv_out.collect(prefix + "conv_out.", out);
}

WaveEncoder::WaveEncoder(double width, Rng& rng) {
    int ch[5] = {scaled(32, width), scaled(64, width), scaled(128, width),
                 scaled(256, width), scaled(512, width)};
    int wide = scaled(1024, width);
    int out_c = scaled(512, width);
    const int k[5] = {6, 8, 8, 8, 10};
    const int s[5] = {3, 4, 4, 4, 5};
    const int p[5] = {2, 2, 2, 2, 3};
    conv_in = ConvT1d(1, ch[0], 7, rng, 1, 3);
    bn_in = DualStatBatchNorm(ch[0]);
    for (int i = 0; i < 5; ++i) {
        stacks.emplace_back(ch[i], 1, rng);
        int next = i < 4 ? ch[i + 1] : wide;
        down.emplace_back(ch[i], next, k[i], rng, s[i], p[i]);
        bn_down.emplace_back(next);
    }
    conv_out = ConvT1d(wide, out_c, 7, rng, 1, 3);
}

std::vector<Tensor> WaveEncoder::forward(const std::vector<Tensor>& items,
                                         Modality tag, Mode mode) {
    std::vector<Tensor> h;
    h.reserve(items.size());
    for (const auto& x : items) {
        if (x.shape().size() != 1 || x.size() < 1)
            throw InvalidArgument("wave encoder: empty input");
        if (x.size() % kSamplesPerFeature != 0)
            throw InvalidArgument(
                "wave encoder: length must be a multiple of 960");
        h.push_back(conv_in.forward(nn::reshape(x, {1, x.dim(0)})));
    }
    h = bn_in.forward(h, tag, mode);
    for (int i = 0; i < 5; ++i) {
        h = stacks[i].forward(h, tag, mode);
        for (auto& x : h)
            x = down[i].forward(nn::leaky_relu(x, kLeakySlope));
        h = bn_down[i].forward(h, tag, mode);
    }
    std::vector<Tensor> out;
    out.reserve(h.size());
    for (auto& x : h)
        out.push_back(nn::transpose2d(nn::tanh_t(
            conv_out.forward(nn::leaky_relu(x, kLeakySlope)))));
    return out;
}

void WaveEncoder::collect(const std::string& prefix, NamedTensors& out) {
    conv_in.collect(prefix + "conv_in.", out);
    bn_in.collect(prefix + "bn_in.", out);
    for (int i = 0; i < 5; ++i) {
        std::string sp = prefix + "down" + std::to_string(i) + ".";
        stacks[i].collect(sp + "rs.", out);
        down[i].collect(sp, out);
        bn_down[i].collect(sp + "bn.", out);
    }
    conv_out.collect(prefix + "conv_out.", out);
}

// ---- temporal modules ------------------------------------------------------

WaveTemporalV2A::WaveTemporalV2A(int in_dim, double width, Rng& rng)
    : lstm(in_dim, scaled(256, width), 2, rng) {}

Tensor WaveTemporalV2A::forward(const Tensor& z) const {
    return lstm.forward(z);
}

void WaveTemporalV2A::collect(const std::string& prefix, NamedTensors& out) {
    lstm.collect(prefix + "lstm.", out);
}

WaveTemporalA2A::WaveTemporalA2A(double width, Rng& rng)
    : down(scaled(512, width), scaled(128, width), 2, rng),
      upw(scaled(256, width), scaled(256, width), 2, rng) {}

Tensor WaveTemporalA2A::forward(const Tensor& z) const {
    return upw.forward(down.forward(z));
}

void WaveTemporalA2A::collect(const std::string& prefix, NamedTensors& out) {
    down.collect(prefix + "down.", out);
    upw.collect(prefix + "up.", out);
}

MelTemporalV2A::MelTemporalV2A(int in_dim, double width, Rng& rng)
    : pre(in_dim, scaled(384, width), 1, rng),
      post(2 * scaled(384, width), scaled(384, width), 1, rng) {}

Tensor MelTemporalV2A::forward(const Tensor& z) const {
    Tensor h = pre.forward(z);
    h = nn_time_upsample(h, kVideoFps, dsp::kMelFrameRate);
    return post.forward(h);
}

void MelTemporalV2A::collect(const std::string& prefix, NamedTensors& out) {
    pre.collect(prefix + "pre.", out);
    post.collect(prefix + "post.", out);
}

MelTemporalA2A::MelTemporalA2A(double width, Rng& rng)
    : pre(scaled(64, width), scaled(256, width), 2, rng),
      post(2 * scaled(256, width), scaled(384, width), 2, rng) {}

Tensor MelTemporalA2A::forward(const Tensor& z) const {
    if (z.dim(0) < 4)
        throw InvalidArgument("a2a mel temporal: need at least 4 frames");
    Tensor h = pre.forward(z);
    h = time_downsample(h, dsp::kMelFrameRate, kVideoFps);
    h = nn_time_upsample(h, kVideoFps, dsp::kMelFrameRate);
    // the up/down index maps are exact inverses only at multiples of 16
    if (h.dim(0) != z.dim(0)) {
        std::vector<int> idx(z.dim(0));
        for (int i = 0; i < z.dim(0); ++i)
            idx[i] = std::min(i, h.dim(0) - 1);
        h = nn::gather_rows(h, idx);
    }
    return post.forward(h);
}

void MelTemporalA2A::collect(const std::string& prefix, NamedTensors& out) {
    pre.collect(prefix + "pre.", out);
    post.collect(prefix + "post.", out);
}

// ---- conformer stack (mel encoder / decoder) -------------------------------

ConformerStack::ConformerStack(int d_in, int d_out, int b, double width,
                               Rng& rng) {
    ConformerConfig cc;
    cc.dim = scaled(256, width);
    cc.ff_dim = scaled(2048, width);
    while (cc.dim % cc.heads != 0) --cc.heads;
    in = Linear(d_in, cc.dim, rng);
    out = Linear(cc.dim, d_out, rng);
    for (int i = 0; i < b; ++i) cblocks.emplace_back(cc, rng);
}

std::vector<Tensor> ConformerStack::forward(const std::vector<Tensor>& items,
                                            Modality tag, Mode mode,
                                            Rng& rng) {
    std::vector<Tensor> h;
    h.reserve(items.size());
    for (const auto& x : items)
        h.push_back(nn::dropout(in.forward(x), dropout, rng,
                                mode == Mode::train));
    for (auto& blk : cblocks) h = blk.forward(h, tag, mode, rng);
    for (auto& x : h) x = out.forward(x);
    return h;
}

void ConformerStack::collect(const std::string& prefix, NamedTensors& out_) {
    in.collect(prefix + "in.", out_);
    for (std::size_t i = 0; i < cblocks.size(); ++i)
        cblocks[i].collect(prefix + "block" + std::to_string(i) + ".", out_);
    out.collect(prefix + "out.", out_);
}

// ---- discriminator ---------------------------------------------------------

ScaleDiscriminator::ScaleDiscriminator(double width, Rng& rng) {
    int c16 = scaled(16, width), c64 = scaled(64, width);
    int c256 = scaled(256, width), c512 = scaled(512, width);
    convs.emplace_back(1, c16, 15, rng, 1, 0, 1, 1, true);
    convs.emplace_back(c16, c64, 41, rng, 4, 20, 1, fit_groups(4, c16, c64),
                       true);
    convs.emplace_back(c64, c256, 41, rng, 4, 20, 1,
                       fit_groups(16, c64, c256), true);
    convs.emplace_back(c256, c512, 41, rng, 4, 20, 1,
                       fit_groups(64, c256, c512), true);
    convs.emplace_back(c512, c512, 5, rng, 1, 2, 1, 1, true);
    convs.emplace_back(c512, c512, 3, rng, 1, 1, 1, 1, true);
}

Tensor ScaleDiscriminator::forward(const Tensor& x) const {
    Tensor h = nn::reflection_pad1d(x, 7, 7);
    for (std::size_t i = 0; i < convs.size(); ++i) {
        h = convs[i].forward(h);
        if (i + 1 < convs.size()) h = nn::leaky_relu(h, kLeakySlope);
    }
    return h;
}

void ScaleDiscriminator::collect(const std::string& prefix,
                                 NamedTensors& out) {
    for (std::size_t i = 0; i < convs.size(); ++i)
        convs[i].collect(prefix + "conv" + std::to_string(i) + ".", out);
}

MultiScaleDiscriminator::MultiScaleDiscriminator(double width, Rng& rng) {
    for (int i = 0; i < 3; ++i) scales.emplace_back(width, rng);
}

std::vector<Tensor> MultiScaleDiscriminator::forward(const Tensor& x) const {
    if (x.shape().size() != 1 || x.size() != dsp::kPipelineSampleRate)
        throw InvalidArgument("discriminator: expected 24000 samples");
    std::vector<Tensor> maps;
    Tensor h = nn::reshape(x, {1, x.dim(0)});
    for (int i = 0; i < 3; ++i) {
        maps.push_back(scales[i].forward(h));
        if (i < 2) h = nn::avg_pool1d(h, 4, 2, 1);
    }
    return maps;
}

void MultiScaleDiscriminator::collect(const std::string& prefix,
                                      NamedTensors& out) {
    for (std::size_t i = 0; i < scales.size(); ++i)
        scales[i].collect(prefix + "scale" + std::to_string(i) + ".", out);
}

// ---- graph assembly --------------------------------------------------------

NamedTensors ModelGraph::named() {
    NamedTensors nt;
    if (video_enc) video_enc->collect("E_V.", nt);
    if (id_enc) id_enc->collect("E_I.", nt);
    if (wave_t_v) wave_t_v->collect("T_V.", nt);
    if (mel_t_v) mel_t_v->collect("T_V.", nt);
    if (wave_t_a) wave_t_a->collect("T_A.", nt);
    if (mel_t_a) mel_t_a->collect("T_A.", nt);
    if (wave_dec) wave_dec->collect("F.", nt);
    if (mel_dec) mel_dec->collect("F.", nt);
    if (wave_enc) wave_enc->collect("E_A.", nt);
    if (mel_enc) mel_enc->collect("E_A.", nt);
    if (disc) disc->collect("D.", nt);
    return nt;
}

std::vector<Tensor> ModelGraph::params(const std::vector<std::string>& roles) {
    NamedTensors nt = named();
    std::vector<Tensor> out;
    for (auto& [name, t] : nt.params) {
        bool keep = roles.empty();
        for (const auto& r : roles)
            keep = keep || name.rfind(r + ".", 0) == 0;
        if (keep) out.push_back(t);
    }
    return out;
}

std::vector<Tensor> ModelGraph::generate_from_video(
    const std::vector<Tensor>& video, const std::vector<Tensor>& ids,
    Mode mode) {
    if (!video_enc)
        throw InvalidArgument("model has no video branch");
    if (!ids.empty() && ids.size() != video.size())
        throw InvalidArgument("one identity embedding per clip expected");
    auto feats = video_enc->forward(video, mode);
    for (std::size_t i = 0; i < feats.size(); ++i)
        feats[i] = id_enc->forward(feats[i],
                                   ids.empty() ? Tensor() : ids[i]);
    if (wave_t_v) {
        for (auto& f : feats) f = wave_t_v->forward(f);
        return wave_dec->forward(feats, Modality::video, mode);
    }
    for (auto& f : feats) f = mel_t_v->forward(f);
    return mel_dec->forward(feats, Modality::video, mode, dropout_rng);
}

std::vector<Tensor> ModelGraph::generate_from_audio(
    const std::vector<Tensor>& inputs, Mode mode, Modality tag) {
    if (wave_enc) {
        auto feats = wave_enc->forward(inputs, tag, mode);
        for (auto& f : feats) f = wave_t_a->forward(f);
        return wave_dec->forward(feats, tag, mode);
    }
    if (!mel_enc) throw InvalidArgument("model has no audio branch");
    auto feats = mel_enc->forward(inputs, tag, mode, dropout_rng);
    for (auto& f : feats) f = mel_t_a->forward(f);
    return mel_dec->forward(feats, tag, mode, dropout_rng);
}

ModelGraph build_model(const ModelConfig& cfg) {
    ModelGraph g;
    g.cfg = cfg;
    Rng rng(cfg.seed);
    g.dropout_rng = Rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    double w = cfg.width;
    int vis = scaled(512, w);
    switch (cfg.family) {
        case Family::v2a_wave: {
            g.video_enc = std::make_unique<VideoFramesEncoder>(w, rng);
            g.id_enc =
                std::make_unique<IdentityEncoder>(cfg.identity, w, rng);
            g.wave_t_v = std::make_unique<WaveTemporalV2A>(
                g.id_enc->out_dim(vis), w, rng);
            g.wave_dec = std::make_unique<WaveDecoder>(w, rng);
            g.disc = std::make_unique<MultiScaleDiscriminator>(w, rng);
            break;
        }
        case Family::a2a_wave: {
            g.wave_enc = std::make_unique<WaveEncoder>(w, rng);
            g.wave_t_a = std::make_unique<WaveTemporalA2A>(w, rng);
            g.wave_dec = std::make_unique<WaveDecoder>(w, rng);
            g.disc = std::make_unique<MultiScaleDiscriminator>(w, rng);
            break;
        }
        case Family::v2a_mel: {
            g.video_enc = std::make_unique<VideoFramesEncoder>(w, rng);
            g.id_enc =
                std::make_unique<IdentityEncoder>(cfg.identity, w, rng);
            g.mel_t_v = std::make_unique<MelTemporalV2A>(
                g.id_enc->out_dim(vis), w, rng);
            g.mel_dec = std::make_unique<ConformerStack>(
                2 * scaled(384, w), dsp::kMelBands, mel_blocks(cfg.size), w,
                rng);
            break;
        }
        case Family::a2a_mel: {
            g.mel_enc = std::make_unique<ConformerStack>(
                dsp::kMelBands, scaled(64, w), 2, w, rng);
            g.mel_t_a = std::make_unique<MelTemporalA2A>(w, rng);
            g.mel_dec = std::make_unique<ConformerStack>(
                2 * scaled(384, w), dsp::kMelBands, mel_blocks(cfg.size), w,
                rng);
            break;
        }
    }
    return g;
}

Tensor pad_to_block(const Tensor& audio, int* pad_len) {
    if (audio.shape().size() != 1 || audio.size() < 1)
        throw InvalidArgument("pad_to_block: expected non-empty 1-D audio");
    int t = audio.dim(0);
    int pad = (kSamplesPerFeature - t % kSamplesPerFeature) %
              kSamplesPerFeature;
    if (pad_len) *pad_len = pad;
    if (pad == 0) return audio;
    Tensor out = nn::make_op({t + pad}, {audio}, [t](nn::Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < t; ++i) p.grad[i] += n.grad[i];
    });
    for (int i = 0; i < t; ++i) out.val()[i] = audio.val()[i];
    for (int i = t; i < t + pad; ++i) out.val()[i] = 0.0;
    return out;
}

}  // namespace vts::models
