#include "vts/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace vts::nn {

using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(numel(n->shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(Shape shape, Real v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.val().begin(), t.val().end(), v);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<Real> data, bool requires_grad) {
    auto n = std::make_shared<Node>();
    if (numel(shape) != static_cast<long>(data.size()))
        throw InvalidArgument("Tensor::from: shape/data size mismatch");
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(Real v) { return from({1}, {v}); }

void Tensor::backward() const {
    if (size() != 1)
        throw InvalidArgument("backward() expects a scalar root");
    // Iterative topological sort (graphs can be deep: BPTT, long conv chains).
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({node_.get(), 0});
    node_->visit_mark = 1;
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->visit_mark == 0) {
                p->visit_mark = 1;
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->ensure_grad();
    node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        n->visit_mark = 0;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

Tensor make_op(Shape shape, std::vector<Tensor> parents,
               std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(numel(n->shape), 0.0);
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    n->requires_grad = any;
    if (any) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward);
    }
    return Tensor(n);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw InvalidArgument(std::string(op) + ": shape mismatch");
}

void accum(Node& parent, const std::vector<Real>& g) {
    parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) parent.grad[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = make_op(a.shape(), {a, b}, [](Node& n) {
        for (auto& p : n.parents) {
            p->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                p->grad[i] += n.grad[i];
        }
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = a.val()[i] + b.val()[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = make_op(a.shape(), {a, b}, [](Node& n) {
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i];
            n.parents[1]->grad[i] -= n.grad[i];
        }
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = a.val()[i] - b.val()[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto av = a.val(), bv = b.val();
    Tensor out = make_op(a.shape(), {a, b}, [av, bv](Node& n) {
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i] * bv[i];
            n.parents[1]->grad[i] += n.grad[i] * av[i];
        }
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = av[i] * bv[i];
    return out;
}

Tensor divide(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "divide");
    auto av = a.val(), bv = b.val();
    Tensor out = make_op(a.shape(), {a, b}, [av, bv](Node& n) {
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad[i] += n.grad[i] / bv[i];
            n.parents[1]->grad[i] -= n.grad[i] * av[i] / (bv[i] * bv[i]);
        }
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = av[i] / bv[i];
    return out;
}

Tensor scale(const Tensor& a, Real c) {
    Tensor out = make_op(a.shape(), {a}, [c](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * c;
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = a.val()[i] * c;
    return out;
}

Tensor add_scalar(const Tensor& a, Real c) {
    Tensor out = make_op(a.shape(), {a}, [](Node& n) {
        accum(*n.parents[0], n.grad);
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = a.val()[i] + c;
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor abs_t(const Tensor& a) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * (av[i] >= 0 ? 1.0 : -1.0);
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = std::fabs(a.val()[i]);
    return out;
}

Tensor log_t(const Tensor& a) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] / av[i];
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = std::log(a.val()[i]);
    return out;
}

Tensor sqrt_t(const Tensor& a) {
    Tensor out = make_op(a.shape(), {a}, [](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * 0.5 / n.value[i];
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = std::sqrt(a.val()[i]);
    return out;
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor tanh_t(const Tensor& a) {
    Tensor out = make_op(a.shape(), {a}, [](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = std::tanh(a.val()[i]);
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = make_op(a.shape(), {a}, [](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
    });
    for (long i = 0; i < a.size(); ++i)
        out.val()[i] = 1.0 / (1.0 + std::exp(-a.val()[i]));
    return out;
}

Tensor swish(const Tensor& a) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            Real s = 1.0 / (1.0 + std::exp(-av[i]));
            n.parents[0]->grad[i] += n.grad[i] * (s + av[i] * s * (1.0 - s));
        }
    });
    for (long i = 0; i < a.size(); ++i) {
        Real s = 1.0 / (1.0 + std::exp(-a.val()[i]));
        out.val()[i] = a.val()[i] * s;
    }
    return out;
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor leaky_relu(const Tensor& a, Real slope) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av, slope](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad[i] += n.grad[i] * (av[i] > 0 ? 1.0 : slope);
    });
    for (long i = 0; i < a.size(); ++i)
        out.val()[i] = av[i] > 0 ? av[i] : slope * av[i];
    return out;
}

Tensor prelu_channels(const Tensor& x, const Tensor& a) {
    if (x.shape().empty() || a.size() != x.dim(0))
        throw InvalidArgument("prelu_channels: slope per leading channel");
    int C = x.dim(0);
    long R = x.size() / C;
    auto xv = x.val();
    auto av = a.val();
    Tensor out = make_op(x.shape(), {x, a}, [xv, av, C, R](Node& n) {
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (long t = 0; t < R; ++t) {
                long i = c * R + t;
                if (xv[i] > 0) {
                    n.parents[0]->grad[i] += n.grad[i];
                } else {
                    n.parents[0]->grad[i] += n.grad[i] * av[c];
                    n.parents[1]->grad[c] += n.grad[i] * xv[i];
                }
            }
    });
    for (int c = 0; c < C; ++c)
        for (long t = 0; t < R; ++t) {
            long i = c * R + t;
            out.val()[i] = xv[i] > 0 ? xv[i] : av[c] * xv[i];
        }
    return out;
}

Tensor clamp_min(const Tensor& a, Real c) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av, c](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (av[i] > c) n.parents[0]->grad[i] += n.grad[i];
    });
    for (long i = 0; i < a.size(); ++i) out.val()[i] = std::max(av[i], c);
    return out;
}

Tensor clamp(const Tensor& a, Real lo, Real hi) {
    auto av = a.val();
    Tensor out = make_op(a.shape(), {a}, [av, lo, hi](Node& n) {
        n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            if (av[i] > lo && av[i] < hi) n.parents[0]->grad[i] += n.grad[i];
    });
    for (long i = 0; i < a.size(); ++i)
        out.val()[i] = std::min(std::max(av[i], lo), hi);
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out = make_op({1}, {a}, [](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (auto& g : p.grad) g += n.grad[0];
    });
    Real s = 0;
    for (Real v : a.val()) s += v;
    out.val()[0] = s;
    return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / a.size()); }

// ---- shape ops ------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw InvalidArgument("reshape: element count mismatch");
    Tensor out = make_op(shape, {a}, [](Node& n) {
        accum(*n.parents[0], n.grad);
    });
    out.val() = a.val();
    return out;
}

Tensor transpose2d(const Tensor& a) {
    int r = a.dim(0), c = a.dim(1);
    Tensor out = make_op({c, r}, {a}, [r, c](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < r; ++j) p.grad[j * c + i] += n.grad[i * r + j];
    });
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.val()[j * r + i] = a.val()[i * c + j];
    return out;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
    int r = a.dim(0), c = a.dim(1);
    if (start < 0 || start + len > c) throw InvalidArgument("slice_cols: range");
    Tensor out = make_op({r, len}, {a}, [r, c, start, len](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < len; ++j)
                p.grad[i * c + start + j] += n.grad[i * len + j];
    });
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < len; ++j)
            out.val()[i * len + j] = a.val()[i * c + start + j];
    return out;
}

Tensor slice_rows(const Tensor& a, int start, int len) {
    int r = a.dim(0), c = a.dim(1);
    if (start < 0 || start + len > r) throw InvalidArgument("slice_rows: range");
    Tensor out = make_op({len, c}, {a}, [c, start](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            p.grad[start * c + i] += n.grad[i];
    });
    std::copy(a.val().begin() + static_cast<long>(start) * c,
              a.val().begin() + static_cast<long>(start + len) * c,
              out.val().begin());
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw InvalidArgument("concat_cols: empty");
    int r = xs[0].dim(0), ctot = 0;
    std::vector<int> widths;
    for (const auto& x : xs) {
        if (x.dim(0) != r) throw InvalidArgument("concat_cols: row mismatch");
        widths.push_back(x.dim(1));
        ctot += x.dim(1);
    }
    Tensor out = make_op({r, ctot}, xs, [r, ctot, widths](Node& n) {
        int off = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            auto& p = *n.parents[k];
            p.ensure_grad();
            int w = widths[k];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < w; ++j)
                    p.grad[i * w + j] += n.grad[i * ctot + off + j];
            off += w;
        }
    });
    int off = 0;
    for (const auto& x : xs) {
        int w = x.dim(1);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j)
                out.val()[i * ctot + off + j] = x.val()[i * w + j];
        off += w;
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw InvalidArgument("concat_rows: empty");
    int c = xs[0].dim(1), rtot = 0;
    std::vector<long> sizes;
    for (const auto& x : xs) {
        if (x.dim(1) != c) throw InvalidArgument("concat_rows: col mismatch");
        sizes.push_back(x.size());
        rtot += x.dim(0);
    }
    Tensor out = make_op({rtot, c}, xs, [sizes](Node& n) {
        long off = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            auto& p = *n.parents[k];
            p.ensure_grad();
            for (long i = 0; i < sizes[k]; ++i) p.grad[i] += n.grad[off + i];
            off += sizes[k];
        }
    });
    long off = 0;
    for (const auto& x : xs) {
        std::copy(x.val().begin(), x.val().end(), out.val().begin() + off);
        off += x.size();
    }
    return out;
}

Tensor reverse_rows(const Tensor& a) {
    int r = a.dim(0), c = a.dim(1);
    std::vector<int> idx(r);
    for (int i = 0; i < r; ++i) idx[i] = r - 1 - i;
    return gather_rows(a, idx);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    int c = a.dim(1);
    int r = static_cast<int>(indices.size());
    Tensor out = make_op({r, c}, {a}, [c, indices](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t j = 0; j < indices.size(); ++j)
            for (int k = 0; k < c; ++k)
                p.grad[static_cast<long>(indices[j]) * c + k] +=
                    n.grad[j * c + k];
    });
    for (int j = 0; j < r; ++j)
        std::copy(a.val().begin() + static_cast<long>(indices[j]) * c,
                  a.val().begin() + static_cast<long>(indices[j] + 1) * c,
                  out.val().begin() + static_cast<long>(j) * c);
    return out;
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    int m = a.dim(0), k = a.dim(1), n_ = b.dim(1);
    if (b.dim(0) != k) throw InvalidArgument("matmul: inner dim mismatch");
    auto av = a.val(), bv = b.val();
    Tensor out = make_op({m, n_}, {a, b}, [m, k, n_, av, bv](Node& n) {
        CMap A(av.data(), m, k), B(bv.data(), k, n_);
        CMap G(n.grad.data(), m, n_);
        n.parents[0]->ensure_grad();
        n.parents[1]->ensure_grad();
        MMap GA(n.parents[0]->grad.data(), m, k);
        MMap GB(n.parents[1]->grad.data(), k, n_);
        GA.noalias() += G * B.transpose();
        GB.noalias() += A.transpose() * G;
    });
    CMap A(av.data(), m, k), B(bv.data(), k, n_);
    MMap O(out.val().data(), m, n_);
    O.noalias() = A * B;
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    int r = a.dim(0), c = a.dim(1);
    if (v.size() != c) throw InvalidArgument("add_rowvec: width mismatch");
    Tensor out = make_op(a.shape(), {a, v}, [r, c](Node& n) {
        auto& pa = *n.parents[0];
        auto& pv = *n.parents[1];
        pa.ensure_grad();
        pv.ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                pa.grad[i * c + j] += n.grad[i * c + j];
                pv.grad[j] += n.grad[i * c + j];
            }
    });
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.val()[i * c + j] = a.val()[i * c + j] + v.val()[j];
    return out;
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    int r = a.dim(0), c = a.dim(1);
    if (v.size() != c) throw InvalidArgument("mul_rowvec: width mismatch");
    auto av = a.val(), vv = v.val();
    Tensor out = make_op(a.shape(), {a, v}, [r, c, av, vv](Node& n) {
        auto& pa = *n.parents[0];
        auto& pv = *n.parents[1];
        pa.ensure_grad();
        pv.ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                pa.grad[i * c + j] += n.grad[i * c + j] * vv[j];
                pv.grad[j] += n.grad[i * c + j] * av[i * c + j];
            }
    });
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.val()[i * c + j] = av[i * c + j] * vv[j];
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

// ---- normalization / regularization ---------------------------------------

Tensor softmax_rows(const Tensor& a) {
    int r = a.dim(0), c = a.dim(1);
    Tensor out = make_op(a.shape(), {a}, [r, c](Node& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (int i = 0; i < r; ++i) {
            Real dot = 0;
            for (int j = 0; j < c; ++j)
                dot += n.grad[i * c + j] * n.value[i * c + j];
            for (int j = 0; j < c; ++j)
                p.grad[i * c + j] +=
                    n.value[i * c + j] * (n.grad[i * c + j] - dot);
        }
    });
    for (int i = 0; i < r; ++i) {
        Real mx = a.val()[i * c];
        for (int j = 1; j < c; ++j) mx = std::max(mx, a.val()[i * c + j]);
        Real s = 0;
        for (int j = 0; j < c; ++j) {
            out.val()[i * c + j] = std::exp(a.val()[i * c + j] - mx);
            s += out.val()[i * c + j];
        }
        for (int j = 0; j < c; ++j) out.val()[i * c + j] /= s;
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Real eps) {
    int r = x.dim(0), c = x.dim(1);
    if (gamma.size() != c || beta.size() != c)
        throw InvalidArgument("layer_norm: affine size mismatch");
    auto xv = x.val();
    auto gv = gamma.val();
    // Cache per-row mean and inverse stddev for the backward pass.
    auto mu = std::make_shared<std::vector<Real>>(r);
    auto istd = std::make_shared<std::vector<Real>>(r);
    auto xhat = std::make_shared<std::vector<Real>>(static_cast<long>(r) * c);
    Tensor out = make_op(x.shape(), {x, gamma, beta},
                         [r, c, gv, mu, istd, xhat](Node& n) {
        auto& px = *n.parents[0];
        auto& pg = *n.parents[1];
        auto& pb = *n.parents[2];
        px.ensure_grad();
        pg.ensure_grad();
        pb.ensure_grad();
        for (int i = 0; i < r; ++i) {
            Real sum_g = 0, sum_gx = 0;
            for (int j = 0; j < c; ++j) {
                Real gy = n.grad[i * c + j];
                Real xh = (*xhat)[i * c + j];
                pg.grad[j] += gy * xh;
                pb.grad[j] += gy;
                Real gxh = gy * gv[j];
                sum_g += gxh;
                sum_gx += gxh * xh;
            }
            for (int j = 0; j < c; ++j) {
                Real gxh = n.grad[i * c + j] * gv[j];
                Real xh = (*xhat)[i * c + j];
                px.grad[i * c + j] +=
                    (*istd)[i] * (gxh - sum_g / c - xh * sum_gx / c);
            }
        }
    });
    for (int i = 0; i < r; ++i) {
        Real m = 0;
        for (int j = 0; j < c; ++j) m += xv[i * c + j];
        m /= c;
        Real var = 0;
        for (int j = 0; j < c; ++j) {
            Real d = xv[i * c + j] - m;
            var += d * d;
        }
        var /= c;
        Real is = 1.0 / std::sqrt(var + eps);
        (*mu)[i] = m;
        (*istd)[i] = is;
        for (int j = 0; j < c; ++j) {
            Real xh = (xv[i * c + j] - m) * is;
            (*xhat)[i * c + j] = xh;
            out.val()[i * c + j] = xh * gamma.val()[j] + beta.val()[j];
        }
    }
    return out;
}

Tensor glu_cols(const Tensor& x) {
    int r = x.dim(0), c2 = x.dim(1);
    if (c2 % 2 != 0) throw InvalidArgument("glu_cols: odd width");
    int c = c2 / 2;
    Tensor a = slice_cols(x, 0, c);
    Tensor g = slice_cols(x, c, c);
    return mul(a, sigmoid(g));
}

Tensor dropout(const Tensor& x, Real p, Rng& rng, bool train) {
    if (!train || p <= 0.0) return x;
    auto mask = std::make_shared<std::vector<Real>>(x.size());
    Real keep = 1.0 - p;
    for (long i = 0; i < x.size(); ++i)
        (*mask)[i] = rng.uniform(0.0, 1.0) < p ? 0.0 : 1.0 / keep;
    Tensor out = make_op(x.shape(), {x}, [mask](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            px.grad[i] += n.grad[i] * (*mask)[i];
    });
    for (long i = 0; i < x.size(); ++i) out.val()[i] = x.val()[i] * (*mask)[i];
    return out;
}

// ---- batch norm over a list of [C x R_i] ----------------------------------

std::vector<Tensor> batch_norm_train(const std::vector<Tensor>& xs,
                                     const Tensor& gamma, const Tensor& beta,
                                     Real eps, std::vector<Real>* batch_mean,
                                     std::vector<Real>* batch_var) {
    if (xs.empty()) throw InvalidArgument("batch_norm_train: empty batch");
    int C = xs[0].dim(0);
    long total = 0;
    for (const auto& x : xs) {
        if (x.dim(0) != C)
            throw InvalidArgument("batch_norm_train: channel mismatch");
        total += x.size() / C;
    }
    auto mu = std::make_shared<std::vector<Real>>(C, 0.0);
    auto var = std::make_shared<std::vector<Real>>(C, 0.0);
    for (const auto& x : xs) {
        long R = x.size() / C;
        for (int c = 0; c < C; ++c)
            for (long t = 0; t < R; ++t) (*mu)[c] += x.val()[c * R + t];
    }
    for (int c = 0; c < C; ++c) (*mu)[c] /= total;
    for (const auto& x : xs) {
        long R = x.size() / C;
        for (int c = 0; c < C; ++c)
            for (long t = 0; t < R; ++t) {
                Real d = x.val()[c * R + t] - (*mu)[c];
                (*var)[c] += d * d;
            }
    }
    for (int c = 0; c < C; ++c) (*var)[c] /= total;
    if (batch_mean) *batch_mean = *mu;
    if (batch_var) *batch_var = *var;

    // The statistics couple every item, so one fused op produces a
    // concatenated output (sliced back per item below) with the full
    // coupled backward; treating the stats as constants would bias grads.
    auto gv = gamma.val();
    std::vector<Tensor> parents = xs;
    parents.push_back(gamma);
    parents.push_back(beta);
    // Concatenate all items into one flat op output.
    long total_elems = 0;
    for (const auto& x : xs) total_elems += x.size();
    std::vector<long> offsets;
    {
        long off = 0;
        for (const auto& x : xs) {
            offsets.push_back(off);
            off += x.size();
        }
    }
    auto xv_all = std::make_shared<std::vector<Real>>(total_elems);
    {
        long off = 0;
        for (const auto& x : xs) {
            std::copy(x.val().begin(), x.val().end(), xv_all->begin() + off);
            off += x.size();
        }
    }
    std::size_t n_items = xs.size();
    std::vector<long> item_R;
    for (const auto& x : xs) item_R.push_back(x.size() / C);

    Tensor flat = make_op({static_cast<int>(total_elems)}, parents,
                          [C, total, mu, var, gv, xv_all, offsets, item_R,
                           n_items, eps](Node& n) {
        // Standard batch-norm backward, with sums taken across all items.
        std::vector<Real> sum_g(C, 0.0), sum_gx(C, 0.0);
        std::vector<Real> istd(C);
        for (int c = 0; c < C; ++c) istd[c] = 1.0 / std::sqrt((*var)[c] + eps);
        auto& pg = *n.parents[n_items];
        auto& pb = *n.parents[n_items + 1];
        pg.ensure_grad();
        pb.ensure_grad();
        for (std::size_t k = 0; k < n_items; ++k) {
            long R = item_R[k], off = offsets[k];
            for (int c = 0; c < C; ++c)
                for (long t = 0; t < R; ++t) {
                    long i = off + c * R + t;
                    Real xh = ((*xv_all)[i] - (*mu)[c]) * istd[c];
                    Real gy = n.grad[i];
                    pg.grad[c] += gy * xh;
                    pb.grad[c] += gy;
                    Real gxh = gy * gv[c];
                    sum_g[c] += gxh;
                    sum_gx[c] += gxh * xh;
                }
        }
        for (std::size_t k = 0; k < n_items; ++k) {
            auto& px = *n.parents[k];
            px.ensure_grad();
            long R = item_R[k], off = offsets[k];
            for (int c = 0; c < C; ++c)
                for (long t = 0; t < R; ++t) {
                    long i = off + c * R + t;
                    Real xh = ((*xv_all)[i] - (*mu)[c]) * istd[c];
                    Real gxh = n.grad[i] * gv[c];
                    px.grad[c * R + t] +=
                        istd[c] *
                        (gxh - sum_g[c] / total - xh * sum_gx[c] / total);
                }
        }
    });
    {
        long off = 0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            long R = item_R[k];
            for (int c = 0; c < C; ++c) {
                Real is = 1.0 / std::sqrt((*var)[c] + eps);
                for (long t = 0; t < R; ++t)
                    flat.val()[off + c * R + t] =
                        ((*xv_all)[off + c * R + t] - (*mu)[c]) * is *
                            gamma.val()[c] +
                        beta.val()[c];
            }
            off += xs[k].size();
        }
    }
    // Slice back out per item.
    std::vector<Tensor> outs;
    long off = 0;
    for (const auto& x : xs) {
        Tensor flat2d = reshape(flat, {1, static_cast<int>(total_elems)});
        Tensor s = slice_cols(flat2d, static_cast<int>(off),
                              static_cast<int>(x.size()));
        outs.push_back(reshape(s, x.shape()));
        off += x.size();
    }
    return outs;
}

std::vector<Tensor> batch_norm_eval(const std::vector<Tensor>& xs,
                                    const Tensor& gamma, const Tensor& beta,
                                    const std::vector<Real>& running_mean,
                                    const std::vector<Real>& running_var,
                                    Real eps) {
    if (xs.empty()) throw InvalidArgument("batch_norm_eval: empty batch");
    int C = xs[0].dim(0);
    std::vector<Real> scale_c(C), shift_c(C);
    for (int c = 0; c < C; ++c) {
        Real is = 1.0 / std::sqrt(running_var[c] + eps);
        scale_c[c] = gamma.val()[c] * is;
        shift_c[c] = beta.val()[c] - running_mean[c] * gamma.val()[c] * is;
    }
    std::vector<Tensor> outs;
    for (const auto& x : xs) {
        long R = x.size() / C;
        auto sc = scale_c;
        Tensor out = make_op(x.shape(), {x, gamma, beta},
                             [C, R, sc, running_mean, running_var, eps,
                              xv = x.val()](Node& n) {
            auto& px = *n.parents[0];
            auto& pg = *n.parents[1];
            auto& pb = *n.parents[2];
            px.ensure_grad();
            pg.ensure_grad();
            pb.ensure_grad();
            for (int c = 0; c < C; ++c) {
                Real is = 1.0 / std::sqrt(running_var[c] + eps);
                for (long t = 0; t < R; ++t) {
                    Real gy = n.grad[c * R + t];
                    px.grad[c * R + t] += gy * sc[c];
                    pg.grad[c] += gy * (xv[c * R + t] - running_mean[c]) * is;
                    pb.grad[c] += gy;
                }
            }
        });
        for (int c = 0; c < C; ++c)
            for (long t = 0; t < R; ++t)
                out.val()[c * R + t] = x.val()[c * R + t] * scale_c[c] + shift_c[c];
        outs.push_back(out);
    }
    return outs;
}

}  // namespace vts::nn
