#include <Eigen/Dense>
#include <cmath>

#include "vts/tensor.hpp"

namespace vts::nn {

using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

Tensor lstm(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh,
            const Tensor& b) {
    int T = x.dim(0), D = x.dim(1);
    int H4 = w_ih.dim(0);
    if (H4 % 4 != 0 || w_ih.dim(1) != D)
        throw InvalidArgument("lstm: weight shapes");
    int H = H4 / 4;
    if (w_hh.dim(0) != H4 || w_hh.dim(1) != H || b.size() != H4)
        throw InvalidArgument("lstm: weight shapes");

    // Saved activations for BPTT: gates (post-nonlinearity), cell states,
    // tanh(c), hidden states.
    auto gates = std::make_shared<std::vector<Real>>(static_cast<long>(T) * H4);
    auto cs = std::make_shared<std::vector<Real>>(static_cast<long>(T) * H);
    auto tcs = std::make_shared<std::vector<Real>>(static_cast<long>(T) * H);
    auto xv = std::make_shared<std::vector<Real>>(x.val());
    auto wihv = std::make_shared<std::vector<Real>>(w_ih.val());
    auto whhv = std::make_shared<std::vector<Real>>(w_hh.val());

    Tensor out = make_op({T, H}, {x, w_ih, w_hh, b}, [=](Node& n) {
        auto& px = *n.parents[0];
        auto& pwi = *n.parents[1];
        auto& pwh = *n.parents[2];
        auto& pb = *n.parents[3];
        px.ensure_grad();
        pwi.ensure_grad();
        pwh.ensure_grad();
        pb.ensure_grad();
        CMap Wih(wihv->data(), H4, D);
        CMap Whh(whhv->data(), H4, H);
        MMap GWih(pwi.grad.data(), H4, D);
        MMap GWhh(pwh.grad.data(), H4, H);
        Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>> Gb(pb.grad.data(),
                                                              H4);
        Eigen::VectorXd dh = Eigen::VectorXd::Zero(H);
        Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
        Eigen::VectorXd dpre(H4);
        for (int t = T - 1; t >= 0; --t) {
            for (int j = 0; j < H; ++j) dh(j) += n.grad[t * H + j];
            const Real* g = gates->data() + static_cast<long>(t) * H4;
            const Real* c = cs->data() + static_cast<long>(t) * H;
            const Real* tc = tcs->data() + static_cast<long>(t) * H;
            const Real* cprev =
                t > 0 ? cs->data() + static_cast<long>(t - 1) * H : nullptr;
            for (int j = 0; j < H; ++j) {
                Real i_g = g[j], f_g = g[H + j], g_g = g[2 * H + j],
                     o_g = g[3 * H + j];
                Real dct = dc(j) + dh(j) * o_g * (1.0 - tc[j] * tc[j]);
                Real do_pre = dh(j) * tc[j] * o_g * (1.0 - o_g);
                Real di_pre = dct * g_g * i_g * (1.0 - i_g);
                Real dg_pre = dct * i_g * (1.0 - g_g * g_g);
                Real cp = cprev ? cprev[j] : 0.0;
                Real df_pre = dct * cp * f_g * (1.0 - f_g);
                dc(j) = dct * f_g;
                dpre(j) = di_pre;
                dpre(H + j) = df_pre;
                dpre(2 * H + j) = dg_pre;
                dpre(3 * H + j) = do_pre;
                (void)cp;
            }
            Eigen::Map<const Eigen::VectorXd> xt(xv->data() +
                                                     static_cast<long>(t) * D,
                                                 D);
            GWih.noalias() += dpre * xt.transpose();
            Gb += dpre;
            MMap Gx(px.grad.data(), T, D);
            Gx.row(t).transpose().noalias() += Wih.transpose() * dpre;
            if (t > 0) {
                Eigen::Map<const Eigen::VectorXd> hprev(
                    n.value.data() + static_cast<long>(t - 1) * H, H);
                GWhh.noalias() += dpre * hprev.transpose();
                dh.noalias() = Whh.transpose() * dpre;
            }
            (void)c;
        }
    });

    CMap Wih(w_ih.val().data(), H4, D);
    CMap Whh(w_hh.val().data(), H4, H);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd pre(H4);
    for (int t = 0; t < T; ++t) {
        Eigen::Map<const Eigen::VectorXd> xt(
            x.val().data() + static_cast<long>(t) * D, D);
        pre.noalias() = Wih * xt + Whh * h;
        for (int j = 0; j < H4; ++j) pre(j) += b.val()[j];
        Real* g = gates->data() + static_cast<long>(t) * H4;
        for (int j = 0; j < H; ++j) {
            Real i_g = 1.0 / (1.0 + std::exp(-pre(j)));
            Real f_g = 1.0 / (1.0 + std::exp(-pre(H + j)));
            Real g_g = std::tanh(pre(2 * H + j));
            Real o_g = 1.0 / (1.0 + std::exp(-pre(3 * H + j)));
            g[j] = i_g;
            g[H + j] = f_g;
            g[2 * H + j] = g_g;
            g[3 * H + j] = o_g;
            c(j) = f_g * c(j) + i_g * g_g;
            Real tc = std::tanh(c(j));
            (*cs)[static_cast<long>(t) * H + j] = c(j);
            (*tcs)[static_cast<long>(t) * H + j] = tc;
            h(j) = o_g * tc;
            out.val()[static_cast<long>(t) * H + j] = h(j);
        }
    }
    return out;
}

Tensor rel_pos_scores(const Tensor& qv, const Tensor& r) {
    int T = qv.dim(0), d = qv.dim(1);
    if (r.dim(0) != 2 * T - 1 || r.dim(1) != d)
        throw InvalidArgument("rel_pos_scores: r must be [(2T-1) x d]");
    auto qvv = std::make_shared<std::vector<Real>>(qv.val());
    auto rv = std::make_shared<std::vector<Real>>(r.val());
    Tensor out = make_op({T, T}, {qv, r}, [T, d, qvv, rv](Node& n) {
        auto& pq = *n.parents[0];
        auto& pr = *n.parents[1];
        pq.ensure_grad();
        pr.ensure_grad();
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < T; ++j) {
                Real g = n.grad[i * T + j];
                if (g == 0) continue;
                long ri = static_cast<long>(i - j + T - 1) * d;
                for (int k = 0; k < d; ++k) {
                    pq.grad[static_cast<long>(i) * d + k] += g * (*rv)[ri + k];
                    pr.grad[ri + k] += g * (*qvv)[static_cast<long>(i) * d + k];
                }
            }
    });
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            long ri = static_cast<long>(i - j + T - 1) * d;
            Real s = 0;
            for (int k = 0; k < d; ++k)
                s += qv.val()[static_cast<long>(i) * d + k] * r.val()[ri + k];
            out.val()[i * T + j] = s;
        }
    return out;
}

}  // namespace vts::nn
