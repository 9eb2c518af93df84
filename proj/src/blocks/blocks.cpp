#include "vts/blocks.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace vts::blocks {

using nn::Shape;

Tensor* find_named(NamedTensors& nt, const std::string& name) {
    for (auto& [n, t] : nt.params)
        if (n == name) return &t;
    for (auto& [n, t] : nt.buffers)
        if (n == name) return &t;
    return nullptr;
}

Tensor init_fan_in(Shape shape, long fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    Real bound = 1.0 / std::sqrt(static_cast<Real>(std::max(1L, fan_in)));
    for (auto& v : t.val()) v = rng.uniform(-bound, bound);
    return t;
}

Tensor init_orthogonal(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m)
                            .householderQ() *
                        Eigen::MatrixXd::Identity(rows, cols);
    Tensor t = Tensor::zeros({rows, cols}, true);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) t.val()[i * cols + j] = q(i, j);
    return t;
}

// ---- Linear ----------------------------------------------------------------

Linear::Linear(int in, int out, Rng& rng, bool bias) {
    w = init_fan_in({in, out}, in, rng);
    b = bias ? init_fan_in({out}, in, rng) : Tensor::zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x) const { return nn::linear(x, w, b); }

void Linear::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "w", w);
    out.params.emplace_back(prefix + "b", b);
}

// ---- convolutions ----------------------------------------------------------

Conv1d::Conv1d(int in_c, int out_c, int k, Rng& rng, int stride_, int pad_,
               int dilation_, int groups_, bool weight_norm_)
    : stride(stride_), pad(pad_), dilation(dilation_), groups(groups_),
      weight_norm(weight_norm_) {
    long fan_in = static_cast<long>(in_c / groups) * k;
    w = init_fan_in({out_c, in_c / groups, k}, fan_in, rng);
    b = init_fan_in({out_c}, fan_in, rng);
    if (weight_norm) {
        // g starts at ||v|| so the initial effective kernel equals v.
        g = Tensor::zeros({out_c}, true);
        long n = w.size() / out_c;
        for (int c = 0; c < out_c; ++c) {
            Real acc = 0;
            for (long i = 0; i < n; ++i) {
                Real x = w.val()[c * n + i];
                acc += x * x;
            }
            g.val()[c] = std::sqrt(acc);
        }
    }
}

Tensor Conv1d::effective_weight() const {
    if (!weight_norm) return w;
    int out_c = w.dim(0);
    long n = w.size() / out_c;
    for (int c = 0; c < out_c; ++c) {
        Real acc = 0;
        for (long i = 0; i < n; ++i) {
            Real x = w.val()[c * n + i];
            acc += x * x;
        }
        if (acc < 1e-24)
            throw InvalidArgument("weight norm: zero-norm direction");
    }
    Tensor v2 = nn::reshape(w, {out_c, static_cast<int>(n)});
    Tensor ones = Tensor::full({static_cast<int>(n), 1}, 1.0);
    Tensor norms =
        nn::reshape(nn::sqrt_t(nn::matmul(nn::square(v2), ones)), {out_c});
    Tensor s = nn::divide(g, norms);
    Tensor scaled =
        nn::transpose2d(nn::mul_rowvec(nn::transpose2d(v2), s));
    return nn::reshape(scaled, w.shape());
}

Tensor Conv1d::forward(const Tensor& x) const {
    return nn::conv1d(x, effective_weight(), b, stride, pad, dilation, groups);
}

void Conv1d::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "w", w);
    out.params.emplace_back(prefix + "b", b);
    if (weight_norm) out.params.emplace_back(prefix + "g", g);
}

ConvT1d::ConvT1d(int in_c, int out_c, int k, Rng& rng, int stride_, int pad_,
                 int output_pad_)
    : stride(stride_), pad(pad_), output_pad(output_pad_) {
    long fan_in = static_cast<long>(in_c) * k;
    w = init_fan_in({in_c, out_c, k}, fan_in, rng);
    b = init_fan_in({out_c}, fan_in, rng);
}

Tensor ConvT1d::forward(const Tensor& x) const {
    return nn::conv_transpose1d(x, w, b, stride, pad, output_pad);
}

void ConvT1d::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "w", w);
    out.params.emplace_back(prefix + "b", b);
}

Conv2d::Conv2d(int in_c, int out_c, int k, Rng& rng, int stride_, int pad_)
    : stride(stride_), pad(pad_) {
    long fan_in = static_cast<long>(in_c) * k * k;
    w = init_fan_in({out_c, in_c, k, k}, fan_in, rng);
    b = init_fan_in({out_c}, fan_in, rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
    return nn::conv2d(x, w, b, stride, pad);
}

void Conv2d::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "w", w);
    out.params.emplace_back(prefix + "b", b);
}

Conv3d::Conv3d(int in_c, int out_c, const int k[3], Rng& rng,
               const int stride_[3], const int pad_[3]) {
    for (int i = 0; i < 3; ++i) {
        stride[i] = stride_[i];
        pad[i] = pad_[i];
    }
    long fan_in = static_cast<long>(in_c) * k[0] * k[1] * k[2];
    w = init_fan_in({out_c, in_c, k[0], k[1], k[2]}, fan_in, rng);
    b = init_fan_in({out_c}, fan_in, rng);
}

Tensor Conv3d::forward(const Tensor& x) const {
    return nn::conv3d(x, w, b, stride, pad);
}

void Conv3d::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "w", w);
    out.params.emplace_back(prefix + "b", b);
}

// ---- dual-statistics batch norm --------------------------------------------

DualStatBatchNorm::DualStatBatchNorm(int channels) {
    gamma = Tensor::full({channels}, 1.0, true);
    beta = Tensor::zeros({channels}, true);
    mean_audio = Tensor::zeros({channels});
    var_audio = Tensor::full({channels}, 1.0);
    mean_video = Tensor::zeros({channels});
    var_video = Tensor::full({channels}, 1.0);
}

std::vector<Tensor> DualStatBatchNorm::forward(const std::vector<Tensor>& xs,
                                               Modality tag, Mode mode) {
    if (tag != Modality::audio && tag != Modality::video)
        throw InvalidArgument("batch norm: unknown modality tag");
    Tensor& m = tag == Modality::audio ? mean_audio : mean_video;
    Tensor& v = tag == Modality::audio ? var_audio : var_video;
    if (mode == Mode::eval)
        return nn::batch_norm_eval(xs, gamma, beta, m.val(), v.val(), eps);
    std::vector<Real> bm, bv;
    auto out = nn::batch_norm_train(xs, gamma, beta, eps, &bm, &bv);
    for (std::size_t c = 0; c < bm.size(); ++c) {
        m.val()[c] = (1 - momentum) * m.val()[c] + momentum * bm[c];
        v.val()[c] = (1 - momentum) * v.val()[c] + momentum * bv[c];
    }
    return out;
}

Tensor DualStatBatchNorm::forward1(const Tensor& x, Modality tag, Mode mode) {
    return forward(std::vector<Tensor>{x}, tag, mode)[0];
}

void DualStatBatchNorm::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "gamma", gamma);
    out.params.emplace_back(prefix + "beta", beta);
    out.buffers.emplace_back(prefix + "mean_audio", mean_audio);
    out.buffers.emplace_back(prefix + "var_audio", var_audio);
    out.buffers.emplace_back(prefix + "mean_video", mean_video);
    out.buffers.emplace_back(prefix + "var_video", var_video);
}

// ---- residual stacks -------------------------------------------------------

ResidualStack1d::ResidualStack1d(int channels, int dilation_, Rng& rng)
    : dilation(dilation_),
      conv_dil(channels, channels, 3, rng, 1, 0, dilation_),
      conv_pw(channels, channels, 1, rng),
      conv_skip(channels, channels, 1, rng),
      bn1(channels), bn2(channels), bn_skip(channels) {}

std::vector<Tensor> ResidualStack1d::forward(const std::vector<Tensor>& xs,
                                             Modality tag, Mode mode) {
    std::vector<Tensor> main;
    main.reserve(xs.size());
    for (const auto& x : xs) {
        Tensor h = nn::leaky_relu(x, kLeakySlope);
        // pad D each side so the dilated k=3 conv preserves length
        h = nn::reflection_pad1d(h, dilation, dilation);
        main.push_back(conv_dil.forward(h));
    }
    main = bn1.forward(main, tag, mode);
    for (auto& h : main)
        h = conv_pw.forward(nn::leaky_relu(h, kLeakySlope));
    main = bn2.forward(main, tag, mode);

    std::vector<Tensor> skip;
    skip.reserve(xs.size());
    for (const auto& x : xs) skip.push_back(conv_skip.forward(x));
    skip = bn_skip.forward(skip, tag, mode);

    std::vector<Tensor> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        out.push_back(nn::add(main[i], skip[i]));
    return out;
}

void ResidualStack1d::collect(const std::string& prefix, NamedTensors& out) {
    conv_dil.collect(prefix + "conv_dil.", out);
    conv_pw.collect(prefix + "conv_pw.", out);
    conv_skip.collect(prefix + "conv_skip.", out);
    bn1.collect(prefix + "bn1.", out);
    bn2.collect(prefix + "bn2.", out);
    bn_skip.collect(prefix + "bn_skip.", out);
}

ResidualStack2d::ResidualStack2d(int in_c, int out_c, int stride, Rng& rng)
    : downsample(stride != 1 || in_c != out_c),
      conv1(in_c, out_c, 3, rng, stride, 1),
      conv2(out_c, out_c, 3, rng, 1, 1),
      bn1(out_c), bn2(out_c) {
    if (stride < 1) throw InvalidArgument("residual stack: stride >= 1");
    if (downsample) {
        conv_skip = Conv2d(in_c, out_c, 1, rng, stride, 0);
        bn_skip = DualStatBatchNorm(out_c);
    }
    prelu_a = Tensor::full({out_c}, kPreluInit, true);
}

std::vector<Tensor> ResidualStack2d::forward(const std::vector<Tensor>& xs,
                                             Modality tag, Mode mode) {
    std::vector<Tensor> main;
    main.reserve(xs.size());
    for (const auto& x : xs) main.push_back(conv1.forward(x));
    main = bn1.forward(main, tag, mode);
    for (auto& h : main) h = conv2.forward(nn::prelu_channels(h, prelu_a));
    main = bn2.forward(main, tag, mode);

    std::vector<Tensor> skip;
    if (downsample) {
        for (const auto& x : xs) skip.push_back(conv_skip.forward(x));
        skip = bn_skip.forward(skip, tag, mode);
    } else {
        skip = xs;
    }
    std::vector<Tensor> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        out.push_back(nn::add(main[i], skip[i]));
    return out;
}

void ResidualStack2d::collect(const std::string& prefix, NamedTensors& out) {
    conv1.collect(prefix + "conv1.", out);
    conv2.collect(prefix + "conv2.", out);
    bn1.collect(prefix + "bn1.", out);
    bn2.collect(prefix + "bn2.", out);
    out.params.emplace_back(prefix + "prelu", prelu_a);
    if (downsample) {
        conv_skip.collect(prefix + "conv_skip.", out);
        bn_skip.collect(prefix + "bn_skip.", out);
    }
}

// ---- layer norm / recurrent ------------------------------------------------

LayerNormP::LayerNormP(int dim) {
    gamma = Tensor::full({dim}, 1.0, true);
    beta = Tensor::zeros({dim}, true);
}

Tensor LayerNormP::forward(const Tensor& x) const {
    return nn::layer_norm(x, gamma, beta);
}

void LayerNormP::collect(const std::string& prefix, NamedTensors& out) {
    out.params.emplace_back(prefix + "gamma", gamma);
    out.params.emplace_back(prefix + "beta", beta);
}

BiLstm::BiLstm(int in_dim, int hidden_, int layers_, Rng& rng)
    : hidden(hidden_), layers(layers_) {
    int in = in_dim;
    for (int l = 0; l < layers; ++l) {
        for (int d = 0; d < 2; ++d) {
            w_ih.push_back(init_fan_in({4 * hidden, in}, hidden, rng));
            w_hh.push_back(init_orthogonal(4 * hidden, hidden, rng));
            b.push_back(init_fan_in({4 * hidden}, hidden, rng));
        }
        in = 2 * hidden;
    }
}

Tensor BiLstm::forward(const Tensor& x) const {
    Tensor h = x;
    for (int l = 0; l < layers; ++l) {
        Tensor fwd = nn::lstm(h, w_ih[2 * l], w_hh[2 * l], b[2 * l]);
        Tensor bwd = nn::reverse_rows(nn::lstm(
            nn::reverse_rows(h), w_ih[2 * l + 1], w_hh[2 * l + 1],
            b[2 * l + 1]));
        h = nn::concat_cols({fwd, bwd});
    }
    return h;
}

void BiLstm::collect(const std::string& prefix, NamedTensors& out) {
    for (int l = 0; l < layers; ++l)
        for (int d = 0; d < 2; ++d) {
            std::string p = prefix + "l" + std::to_string(l) +
                            (d == 0 ? ".fwd." : ".bwd.");
            out.params.emplace_back(p + "w_ih", w_ih[2 * l + d]);
            out.params.emplace_back(p + "w_hh", w_hh[2 * l + d]);
            out.params.emplace_back(p + "b", b[2 * l + d]);
        }
}

// ---- conformer -------------------------------------------------------------

FeedForward::FeedForward(int dim, int ff_dim, Rng& rng)
    : ln(dim), in(dim, ff_dim, rng), out(ff_dim, dim, rng) {}

Tensor FeedForward::forward(const Tensor& x, Real p, Rng& rng,
                            Mode mode) const {
    Tensor h = nn::swish(in.forward(ln.forward(x)));
    h = nn::dropout(h, p, rng, mode == Mode::train);
    h = out.forward(h);
    return nn::dropout(h, p, rng, mode == Mode::train);
}

void FeedForward::collect(const std::string& prefix, NamedTensors& out_) {
    ln.collect(prefix + "ln.", out_);
    in.collect(prefix + "in.", out_);
    out.collect(prefix + "out.", out_);
}

namespace {

// Sinusoidal encodings for relative offsets T-1 .. -(T-1); row index
// (i - j) + T - 1 matches nn::rel_pos_scores.
Tensor rel_sinusoid(int t, int dim) {
    Tensor pe = Tensor::zeros({2 * t - 1, dim});
    for (int idx = 0; idx < 2 * t - 1; ++idx) {
        double rel = idx - (t - 1);
        for (int i = 0; i * 2 < dim; ++i) {
            double freq = std::pow(10000.0, -2.0 * i / dim);
            pe.val()[static_cast<long>(idx) * dim + 2 * i] =
                std::sin(rel * freq);
            if (2 * i + 1 < dim)
                pe.val()[static_cast<long>(idx) * dim + 2 * i + 1] =
                    std::cos(rel * freq);
        }
    }
    return pe;
}

}  // namespace

ConformerBlock::ConformerBlock(const ConformerConfig& cfg_, Rng& rng)
    : cfg(cfg_),
      ff1(cfg_.dim, cfg_.ff_dim, rng), ff2(cfg_.dim, cfg_.ff_dim, rng),
      ln_attn(cfg_.dim), ln_conv(cfg_.dim), ln_final(cfg_.dim),
      wq(cfg_.dim, cfg_.dim, rng), wk(cfg_.dim, cfg_.dim, rng),
      wv(cfg_.dim, cfg_.dim, rng), wo(cfg_.dim, cfg_.dim, rng),
      wr(cfg_.dim, cfg_.dim, rng, false),
      pw1(cfg_.dim, 2 * cfg_.dim, rng), pw2(cfg_.dim, cfg_.dim, rng),
      depthwise(cfg_.dim, cfg_.dim, cfg_.conv_kernel, rng, 1,
                (cfg_.conv_kernel - 1) / 2, 1, cfg_.dim),
      bn(cfg_.dim) {
    if (cfg.dim % cfg.heads != 0)
        throw InvalidArgument("conformer: dim must divide by heads");
    if (cfg.conv_kernel % 2 == 0)
        throw InvalidArgument("conformer: conv kernel must be odd");
    u_bias = init_fan_in({1, cfg.dim}, cfg.dim, rng);
    v_bias = init_fan_in({1, cfg.dim}, cfg.dim, rng);
}

std::vector<Tensor> ConformerBlock::forward(const std::vector<Tensor>& xs,
                                            Modality tag, Mode mode,
                                            Rng& rng) {
    int d = cfg.dim;
    int dh = d / cfg.heads;
    Real p = cfg.dropout;
    bool train = mode == Mode::train;

    std::vector<Tensor> h;
    h.reserve(xs.size());
    for (const auto& x : xs) {
        if (x.shape().size() != 2 || x.dim(1) != d)
            throw InvalidArgument("conformer: expected [T x dim] input");
        Tensor h1 = nn::add(x, nn::scale(ff1.forward(x, p, rng, mode), 0.5));

        // relative-position multi-headed self-attention
        int t = h1.dim(0);
        Tensor a = ln_attn.forward(h1);
        Tensor q = wq.forward(a), k = wk.forward(a), v = wv.forward(a);
        Tensor r = nn::matmul(rel_sinusoid(t, d), wr.w);
        std::vector<Tensor> heads;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            Tensor qh = nn::slice_cols(q, hd * dh, dh);
            Tensor kh = nn::slice_cols(k, hd * dh, dh);
            Tensor vh = nn::slice_cols(v, hd * dh, dh);
            Tensor rh = nn::slice_cols(r, hd * dh, dh);
            Tensor uh = nn::reshape(nn::slice_cols(u_bias, hd * dh, dh), {dh});
            Tensor vb = nn::reshape(nn::slice_cols(v_bias, hd * dh, dh), {dh});
            Tensor content =
                nn::matmul(nn::add_rowvec(qh, uh), nn::transpose2d(kh));
            Tensor pos = nn::rel_pos_scores(nn::add_rowvec(qh, vb), rh);
            Tensor attn = nn::softmax_rows(
                nn::scale(nn::add(content, pos), 1.0 / std::sqrt(dh)));
            attn = nn::dropout(attn, p, rng, train);
            heads.push_back(nn::matmul(attn, vh));
        }
        Tensor mhsa = wo.forward(nn::concat_cols(heads));
        h.push_back(nn::add(h1, nn::dropout(mhsa, p, rng, train)));
    }

    // convolution module; BN couples the whole batch
    std::vector<Tensor> dw;
    dw.reserve(h.size());
    for (const auto& h2 : h) {
        Tensor c = nn::glu_cols(pw1.forward(ln_conv.forward(h2)));
        dw.push_back(depthwise.forward(nn::transpose2d(c)));
    }
    dw = bn.forward(dw, tag, mode);

    std::vector<Tensor> out;
    out.reserve(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        Tensor c = pw2.forward(nn::transpose2d(nn::swish(dw[i])));
        Tensor h3 = nn::add(h[i], nn::dropout(c, p, rng, train));
        Tensor h4 =
            nn::add(h3, nn::scale(ff2.forward(h3, p, rng, mode), 0.5));
        out.push_back(ln_final.forward(h4));
    }
    return out;
}

Tensor ConformerBlock::forward1(const Tensor& x, Modality tag, Mode mode,
                                Rng& rng) {
    return forward(std::vector<Tensor>{x}, tag, mode, rng)[0];
}

void ConformerBlock::collect(const std::string& prefix, NamedTensors& out) {
    ff1.collect(prefix + "ff1.", out);
    ff2.collect(prefix + "ff2.", out);
    ln_attn.collect(prefix + "ln_attn.", out);
    ln_conv.collect(prefix + "ln_conv.", out);
    ln_final.collect(prefix + "ln_final.", out);
    wq.collect(prefix + "wq.", out);
    wk.collect(prefix + "wk.", out);
    wv.collect(prefix + "wv.", out);
    wo.collect(prefix + "wo.", out);
    wr.collect(prefix + "wr.", out);
    out.params.emplace_back(prefix + "u_bias", u_bias);
    out.params.emplace_back(prefix + "v_bias", v_bias);
    pw1.collect(prefix + "pw1.", out);
    pw2.collect(prefix + "pw2.", out);
    depthwise.collect(prefix + "depthwise.", out);
    bn.collect(prefix + "bn.", out);
}

// ---- temporal resampling ---------------------------------------------------

std::vector<int> upsample_indices(int t, double src_rate, double dst_rate) {
    if (src_rate <= 0 || dst_rate <= 0)
        throw InvalidArgument("time resample: rates must be positive");
    if (dst_rate <= src_rate)
        throw InvalidArgument("nn_time_upsample: dst rate must exceed src");
    int t_out = static_cast<int>(std::lround(t * dst_rate / src_rate));
    std::vector<int> idx(t_out);
    for (int j = 0; j < t_out; ++j)
        idx[j] = std::min(t - 1,
                          static_cast<int>(j * src_rate / dst_rate));
    return idx;
}

std::vector<int> downsample_indices(int t, double src_rate, double dst_rate) {
    if (src_rate <= 0 || dst_rate <= 0)
        throw InvalidArgument("time resample: rates must be positive");
    if (dst_rate >= src_rate)
        throw InvalidArgument("time_downsample: dst rate must be below src");
    int t_out = static_cast<int>(t * dst_rate / src_rate);
    std::vector<int> idx(t_out);
    for (int i = 0; i < t_out; ++i)
        idx[i] = std::min(t - 1,
                          static_cast<int>(i * src_rate / dst_rate));
    return idx;
}

Tensor nn_time_upsample(const Tensor& x, double src_rate, double dst_rate) {
    return nn::gather_rows(x, upsample_indices(x.dim(0), src_rate, dst_rate));
}

Tensor time_downsample(const Tensor& x, double src_rate, double dst_rate) {
    return nn::gather_rows(x, downsample_indices(x.dim(0), src_rate, dst_rate));
}

}  // namespace vts::blocks
