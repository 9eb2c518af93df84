#include <Eigen/Dense>
#include <cmath>

#include "vts/tensor.hpp"

namespace vts::nn {

using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

Tensor reflection_pad1d(const Tensor& x, int left, int right) {
    int C = x.dim(0), T = x.dim(1);
    if (left < 0 || right < 0)
        throw InvalidArgument("reflection_pad1d: negative pad");
    int To = T + left + right;
    // periodic reflection, so pads longer than the signal still work
    auto src_index = [T, left](int t) {
        int s = t - left;
        if (T == 1) return 0;
        int period = 2 * (T - 1);
        s = ((s % period) + period) % period;
        return s < T ? s : period - s;
    };
    Tensor out = make_op({C, To}, {x}, [C, T, To, src_index](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < To; ++t)
                p.grad[c * T + src_index(t)] += n.grad[c * To + t];
    });
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < To; ++t)
            out.val()[c * To + t] = x.val()[c * T + src_index(t)];
    return out;
}

namespace {

// im2col for 1-D: one group slice of x -> [Cg*K x T_out].
void im2col1d(const Real* x, int Cg, int T, int K, int stride, int pad,
              int dil, int Tout, Real* col) {
    for (int c = 0; c < Cg; ++c)
        for (int k = 0; k < K; ++k) {
            Real* row = col + (static_cast<long>(c) * K + k) * Tout;
            for (int t = 0; t < Tout; ++t) {
                int src = t * stride - pad + k * dil;
                row[t] = (src >= 0 && src < T) ? x[c * T + src] : 0.0;
            }
        }
}

void col2im1d_add(const Real* col, int Cg, int T, int K, int stride, int pad,
                  int dil, int Tout, Real* gx) {
    for (int c = 0; c < Cg; ++c)
        for (int k = 0; k < K; ++k) {
            const Real* row = col + (static_cast<long>(c) * K + k) * Tout;
            for (int t = 0; t < Tout; ++t) {
                int src = t * stride - pad + k * dil;
                if (src >= 0 && src < T) gx[c * T + src] += row[t];
            }
        }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, int dilation, int groups) {
    int Ci = x.dim(0), T = x.dim(1);
    int Co = w.dim(0), Cig = w.dim(1), K = w.dim(2);
    if (Ci != Cig * groups || Co % groups != 0)
        throw InvalidArgument("conv1d: channel/group mismatch");
    int Tout = (T + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
    if (Tout < 1) throw InvalidArgument("conv1d: output length < 1");
    int Cog = Co / groups;

    auto xv = std::make_shared<std::vector<Real>>(x.val());
    auto wv = std::make_shared<std::vector<Real>>(w.val());
    Tensor out = make_op({Co, Tout}, {x, w, b},
                         [=](Node& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        px.ensure_grad();
        pw.ensure_grad();
        pb.ensure_grad();
        std::vector<Real> col(static_cast<long>(Cig) * K * Tout);
        std::vector<Real> gcol(col.size());
        for (int g = 0; g < groups; ++g) {
            im2col1d(xv->data() + static_cast<long>(g) * Cig * T, Cig, T, K,
                     stride, pad, dilation, Tout, col.data());
            CMap Wg(wv->data() + static_cast<long>(g) * Cog * Cig * K, Cog,
                    Cig * K);
            CMap G(n.grad.data() + static_cast<long>(g) * Cog * Tout, Cog, Tout);
            CMap Col(col.data(), Cig * K, Tout);
            MMap GW(pw.grad.data() + static_cast<long>(g) * Cog * Cig * K, Cog,
                    Cig * K);
            GW.noalias() += G * Col.transpose();
            MMap GCol(gcol.data(), Cig * K, Tout);
            GCol.noalias() = Wg.transpose() * G;
            col2im1d_add(gcol.data(), Cig, T, K, stride, pad, dilation, Tout,
                         px.grad.data() + static_cast<long>(g) * Cig * T);
            for (int co = 0; co < Cog; ++co)
                for (int t = 0; t < Tout; ++t)
                    pb.grad[g * Cog + co] +=
                        n.grad[(static_cast<long>(g) * Cog + co) * Tout + t];
        }
    });
    std::vector<Real> col(static_cast<long>(Cig) * K * Tout);
    for (int g = 0; g < groups; ++g) {
        im2col1d(x.val().data() + static_cast<long>(g) * Cig * T, Cig, T, K,
                 stride, pad, dilation, Tout, col.data());
        CMap Wg(w.val().data() + static_cast<long>(g) * Cog * Cig * K, Cog,
                Cig * K);
        CMap Col(col.data(), Cig * K, Tout);
        MMap O(out.val().data() + static_cast<long>(g) * Cog * Tout, Cog, Tout);
        O.noalias() = Wg * Col;
        for (int co = 0; co < Cog; ++co)
            O.row(co).array() += b.val()[g * Cog + co];
    }
    return out;
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad, int output_pad) {
    int Ci = x.dim(0), T = x.dim(1);
    int Ciw = w.dim(0), Co = w.dim(1), K = w.dim(2);
    if (Ci != Ciw) throw InvalidArgument("conv_transpose1d: channel mismatch");
    int Tout = (T - 1) * stride - 2 * pad + K + output_pad;
    if (Tout < 1) throw InvalidArgument("conv_transpose1d: output length < 1");

    auto xv = std::make_shared<std::vector<Real>>(x.val());
    auto wv = std::make_shared<std::vector<Real>>(w.val());
    Tensor out = make_op({Co, Tout}, {x, w, b}, [=](Node& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        px.ensure_grad();
        pw.ensure_grad();
        pb.ensure_grad();
        // gcol[(co*K + k), t] = g_out[co, t*stride - pad + k]
        std::vector<Real> gcol(static_cast<long>(Co) * K * T, 0.0);
        for (int co = 0; co < Co; ++co)
            for (int k = 0; k < K; ++k) {
                Real* row = gcol.data() + (static_cast<long>(co) * K + k) * T;
                for (int t = 0; t < T; ++t) {
                    int dst = t * stride - pad + k;
                    if (dst >= 0 && dst < Tout) row[t] = n.grad[co * Tout + dst];
                }
            }
        CMap X(xv->data(), Ci, T);
        CMap GCol(gcol.data(), Co * K, T);
        CMap W(wv->data(), Ci, Co * K);
        MMap GX(px.grad.data(), Ci, T);
        GX.noalias() += W * GCol;
        MMap GW(pw.grad.data(), Ci, Co * K);
        GW.noalias() += X * GCol.transpose();
        for (int co = 0; co < Co; ++co)
            for (int t = 0; t < Tout; ++t) pb.grad[co] += n.grad[co * Tout + t];
    });
    // forward: col = Wᵀ X  -> scatter
    std::vector<Real> col(static_cast<long>(Co) * K * T);
    CMap X(x.val().data(), Ci, T);
    CMap W(w.val().data(), Ci, Co * K);
    MMap Col(col.data(), Co * K, T);
    Col.noalias() = W.transpose() * X;
    for (int co = 0; co < Co; ++co) {
        for (int t2 = 0; t2 < Tout; ++t2) out.val()[co * Tout + t2] = b.val()[co];
        for (int k = 0; k < K; ++k) {
            const Real* row = col.data() + (static_cast<long>(co) * K + k) * T;
            for (int t = 0; t < T; ++t) {
                int dst = t * stride - pad + k;
                if (dst >= 0 && dst < Tout) out.val()[co * Tout + dst] += row[t];
            }
        }
    }
    return out;
}

Tensor avg_pool1d(const Tensor& x, int kernel, int stride, int pad) {
    int C = x.dim(0), T = x.dim(1);
    int Tout = (T + 2 * pad - kernel) / stride + 1;
    // Count excludes zero padding (matches the usual vocoder downsampler).
    std::vector<Real> inv_count(Tout);
    for (int t = 0; t < Tout; ++t) {
        int lo = std::max(0, t * stride - pad);
        int hi = std::min(T, t * stride - pad + kernel);
        inv_count[t] = 1.0 / (hi - lo);
    }
    Tensor out = make_op({C, Tout}, {x}, [C, T, Tout, kernel, stride, pad,
                                          inv_count](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < Tout; ++t) {
                int lo = std::max(0, t * stride - pad);
                int hi = std::min(T, t * stride - pad + kernel);
                for (int s = lo; s < hi; ++s)
                    p.grad[c * T + s] += n.grad[c * Tout + t] * inv_count[t];
            }
    });
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < Tout; ++t) {
            int lo = std::max(0, t * stride - pad);
            int hi = std::min(T, t * stride - pad + kernel);
            Real s = 0;
            for (int i = lo; i < hi; ++i) s += x.val()[c * T + i];
            out.val()[c * Tout + t] = s * inv_count[t];
        }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
    int Ci = x.dim(0), H = x.dim(1), W_ = x.dim(2);
    int Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    if (w.dim(1) != Ci) throw InvalidArgument("conv2d: channel mismatch");
    int Ho = (H + 2 * pad - Kh) / stride + 1;
    int Wo = (W_ + 2 * pad - Kw) / stride + 1;
    long ncols = static_cast<long>(Ho) * Wo;
    long krows = static_cast<long>(Ci) * Kh * Kw;

    auto build_col = [=](const Real* xp, Real* col) {
        for (int c = 0; c < Ci; ++c)
            for (int kh = 0; kh < Kh; ++kh)
                for (int kw = 0; kw < Kw; ++kw) {
                    Real* row =
                        col + ((static_cast<long>(c) * Kh + kh) * Kw + kw) * ncols;
                    for (int ho = 0; ho < Ho; ++ho) {
                        int hs = ho * stride - pad + kh;
                        for (int wo = 0; wo < Wo; ++wo) {
                            int ws = wo * stride - pad + kw;
                            row[ho * Wo + wo] =
                                (hs >= 0 && hs < H && ws >= 0 && ws < W_)
                                    ? xp[(static_cast<long>(c) * H + hs) * W_ + ws]
                                    : 0.0;
                        }
                    }
                }
    };
    auto scatter_col = [=](const Real* col, Real* gx) {
        for (int c = 0; c < Ci; ++c)
            for (int kh = 0; kh < Kh; ++kh)
                for (int kw = 0; kw < Kw; ++kw) {
                    const Real* row =
                        col + ((static_cast<long>(c) * Kh + kh) * Kw + kw) * ncols;
                    for (int ho = 0; ho < Ho; ++ho) {
                        int hs = ho * stride - pad + kh;
                        if (hs < 0 || hs >= H) continue;
                        for (int wo = 0; wo < Wo; ++wo) {
                            int ws = wo * stride - pad + kw;
                            if (ws >= 0 && ws < W_)
                                gx[(static_cast<long>(c) * H + hs) * W_ + ws] +=
                                    row[ho * Wo + wo];
                        }
                    }
                }
    };

    auto xv = std::make_shared<std::vector<Real>>(x.val());
    auto wv = std::make_shared<std::vector<Real>>(w.val());
    Tensor out = make_op({Co, Ho, Wo}, {x, w, b}, [=](Node& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        px.ensure_grad();
        pw.ensure_grad();
        pb.ensure_grad();
        std::vector<Real> col(krows * ncols);
        build_col(xv->data(), col.data());
        CMap G(n.grad.data(), Co, ncols);
        CMap Col(col.data(), krows, ncols);
        MMap GW(pw.grad.data(), Co, krows);
        GW.noalias() += G * Col.transpose();
        CMap Wm(wv->data(), Co, krows);
        std::vector<Real> gcol(krows * ncols);
        MMap GCol(gcol.data(), krows, ncols);
        GCol.noalias() = Wm.transpose() * G;
        scatter_col(gcol.data(), px.grad.data());
        for (int co = 0; co < Co; ++co)
            for (long t = 0; t < ncols; ++t) pb.grad[co] += n.grad[co * ncols + t];
    });
    std::vector<Real> col(krows * ncols);
    build_col(x.val().data(), col.data());
    CMap Wm(w.val().data(), Co, krows);
    CMap Col(col.data(), krows, ncols);
    MMap O(out.val().data(), Co, ncols);
    O.noalias() = Wm * Col;
    for (int co = 0; co < Co; ++co) O.row(co).array() += b.val()[co];
    return out;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b,
              const int stride[3], const int pad[3]) {
    int Ci = x.dim(0), N = x.dim(1), H = x.dim(2), W_ = x.dim(3);
    int Co = w.dim(0), Kn = w.dim(2), Kh = w.dim(3), Kw = w.dim(4);
    if (w.dim(1) != Ci) throw InvalidArgument("conv3d: channel mismatch");
    int No = (N + 2 * pad[0] - Kn) / stride[0] + 1;
    int Ho = (H + 2 * pad[1] - Kh) / stride[1] + 1;
    int Wo = (W_ + 2 * pad[2] - Kw) / stride[2] + 1;
    long ncols = static_cast<long>(No) * Ho * Wo;
    long krows = static_cast<long>(Ci) * Kn * Kh * Kw;
    int s0 = stride[0], s1 = stride[1], s2 = stride[2];
    int p0 = pad[0], p1 = pad[1], p2 = pad[2];

    auto build_col = [=](const Real* xp, Real* col) {
        long r = 0;
        for (int c = 0; c < Ci; ++c)
            for (int kn = 0; kn < Kn; ++kn)
                for (int kh = 0; kh < Kh; ++kh)
                    for (int kw = 0; kw < Kw; ++kw, ++r) {
                        Real* row = col + r * ncols;
                        long q = 0;
                        for (int no = 0; no < No; ++no) {
                            int ns = no * s0 - p0 + kn;
                            for (int ho = 0; ho < Ho; ++ho) {
                                int hs = ho * s1 - p1 + kh;
                                for (int wo = 0; wo < Wo; ++wo, ++q) {
                                    int ws = wo * s2 - p2 + kw;
                                    row[q] =
                                        (ns >= 0 && ns < N && hs >= 0 && hs < H &&
                                         ws >= 0 && ws < W_)
                                            ? xp[((static_cast<long>(c) * N + ns) *
                                                      H +
                                                  hs) *
                                                     W_ +
                                                 ws]
                                            : 0.0;
                                }
                            }
                        }
                    }
    };
    auto scatter_col = [=](const Real* col, Real* gx) {
        long r = 0;
        for (int c = 0; c < Ci; ++c)
            for (int kn = 0; kn < Kn; ++kn)
                for (int kh = 0; kh < Kh; ++kh)
                    for (int kw = 0; kw < Kw; ++kw, ++r) {
                        const Real* row = col + r * ncols;
                        long q = 0;
                        for (int no = 0; no < No; ++no) {
                            int ns = no * s0 - p0 + kn;
                            for (int ho = 0; ho < Ho; ++ho) {
                                int hs = ho * s1 - p1 + kh;
                                for (int wo = 0; wo < Wo; ++wo, ++q) {
                                    int ws = wo * s2 - p2 + kw;
                                    if (ns >= 0 && ns < N && hs >= 0 && hs < H &&
                                        ws >= 0 && ws < W_)
                                        gx[((static_cast<long>(c) * N + ns) * H +
                                            hs) *
                                               W_ +
                                           ws] += row[q];
                                }
                            }
                        }
                    }
    };

    auto xv = std::make_shared<std::vector<Real>>(x.val());
    auto wv = std::make_shared<std::vector<Real>>(w.val());
    Tensor out = make_op({Co, No, Ho, Wo}, {x, w, b}, [=](Node& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        px.ensure_grad();
        pw.ensure_grad();
        pb.ensure_grad();
        std::vector<Real> col(krows * ncols);
        build_col(xv->data(), col.data());
        CMap G(n.grad.data(), Co, ncols);
        CMap Col(col.data(), krows, ncols);
        MMap GW(pw.grad.data(), Co, krows);
        GW.noalias() += G * Col.transpose();
        CMap Wm(wv->data(), Co, krows);
        std::vector<Real> gcol(krows * ncols);
        MMap GCol(gcol.data(), krows, ncols);
        GCol.noalias() = Wm.transpose() * G;
        scatter_col(gcol.data(), px.grad.data());
        for (int co = 0; co < Co; ++co)
            for (long t = 0; t < ncols; ++t) pb.grad[co] += n.grad[co * ncols + t];
    });
    std::vector<Real> col(krows * ncols);
    build_col(x.val().data(), col.data());
    CMap Wm(w.val().data(), Co, krows);
    CMap Col(col.data(), krows, ncols);
    MMap O(out.val().data(), Co, ncols);
    O.noalias() = Wm * Col;
    for (int co = 0; co < Co; ++co) O.row(co).array() += b.val()[co];
    return out;
}

Tensor max_pool3d(const Tensor& x, const int kernel[3], const int stride[3],
                  const int pad[3]) {
    int C = x.dim(0), N = x.dim(1), H = x.dim(2), W_ = x.dim(3);
    int No = (N + 2 * pad[0] - kernel[0]) / stride[0] + 1;
    int Ho = (H + 2 * pad[1] - kernel[1]) / stride[1] + 1;
    int Wo = (W_ + 2 * pad[2] - kernel[2]) / stride[2] + 1;
    long nout = static_cast<long>(C) * No * Ho * Wo;
    auto argmax = std::make_shared<std::vector<long>>(nout);
    int k0 = kernel[0], k1 = kernel[1], k2 = kernel[2];
    int s0 = stride[0], s1 = stride[1], s2 = stride[2];
    int p0 = pad[0], p1 = pad[1], p2 = pad[2];

    Tensor out = make_op({C, No, Ho, Wo}, {x}, [argmax](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            p.grad[(*argmax)[i]] += n.grad[i];
    });
    long q = 0;
    for (int c = 0; c < C; ++c)
        for (int no = 0; no < No; ++no)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo, ++q) {
                    Real best = -1e300;
                    long besti = -1;
                    for (int kn = 0; kn < k0; ++kn) {
                        int ns = no * s0 - p0 + kn;
                        if (ns < 0 || ns >= N) continue;
                        for (int kh = 0; kh < k1; ++kh) {
                            int hs = ho * s1 - p1 + kh;
                            if (hs < 0 || hs >= H) continue;
                            for (int kw = 0; kw < k2; ++kw) {
                                int ws = wo * s2 - p2 + kw;
                                if (ws < 0 || ws >= W_) continue;
                                long i =
                                    ((static_cast<long>(c) * N + ns) * H + hs) *
                                        W_ +
                                    ws;
                                if (x.val()[i] > best) {
                                    best = x.val()[i];
                                    besti = i;
                                }
                            }
                        }
                    }
                    out.val()[q] = best;
                    (*argmax)[q] = besti;
                }
    return out;
}

Tensor adaptive_avg_pool_hw(const Tensor& x) {
    // [C x H x W] -> [C]: global spatial mean per channel.
    if (x.shape().size() != 3)
        throw InvalidArgument("adaptive_avg_pool_hw: expects 3-D input");
    int C = x.dim(0);
    long R = static_cast<long>(x.dim(1)) * x.dim(2);
    Tensor out = make_op({C}, {x}, [C, R](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (long t = 0; t < R; ++t) p.grad[c * R + t] += n.grad[c] / R;
    });
    for (int c = 0; c < C; ++c) {
        Real s = 0;
        for (long t = 0; t < R; ++t) s += x.val()[c * R + t];
        out.val()[c] = s / R;
    }
    return out;
}

}  // namespace vts::nn
