#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vts/common.hpp"

namespace vts::nn {

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

// One node of the dynamic compute graph. Holds the value buffer, the
// gradient buffer (allocated lazily) and a closure that scatters the node's
// gradient into its parents.
struct Node {
    std::vector<Real> value;
    std::vector<Real> grad;
    Shape shape;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // may be empty for leaves
    int visit_mark = 0;                      // scratch for topo sort

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

// Value-semantics handle to a graph node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real v, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<Real> data,
                       bool requires_grad = false);
    static Tensor scalar(Real v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[i]; }
    long size() const { return static_cast<long>(node_->value.size()); }

    std::vector<Real>& val() { return node_->value; }
    const std::vector<Real>& val() const { return node_->value; }
    std::vector<Real>& grad() { return node_->ensure_grad(), node_->grad; }
    const std::vector<Real>& grad() const { return node_->grad; }

    Real item() const { return node_->value.at(0); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }
    void zero_grad() {
        if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
    }

    std::shared_ptr<Node> node() const { return node_; }

    // Reverse-mode sweep from this (scalar) node; seeds d(this)/d(this)=1.
    void backward() const;

private:
    std::shared_ptr<Node> node_;
};

// Helper used by op implementations.
Tensor make_op(Shape shape, std::vector<Tensor> parents,
               std::function<void(Node&)> backward);

// ---- elementwise / reduction ops -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real c);
Tensor add_scalar(const Tensor& a, Real c);
Tensor neg(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor square(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor swish(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Real slope);
// PReLU with one learned slope per channel: x [C x ...], a [C].
Tensor prelu_channels(const Tensor& x, const Tensor& a);
// max(a, c) elementwise; gradient passes only where a > c.
Tensor clamp_min(const Tensor& a, Real c);
Tensor clamp(const Tensor& a, Real lo, Real hi);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- shape ops ------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose2d(const Tensor& a);                    // [R x C] -> [C x R]
Tensor slice_cols(const Tensor& a, int start, int len); // 2-D
Tensor slice_rows(const Tensor& a, int start, int len); // 2-D
Tensor concat_cols(const std::vector<Tensor>& xs);      // 2-D, same rows
Tensor concat_rows(const std::vector<Tensor>& xs);      // 2-D, same cols
Tensor reverse_rows(const Tensor& a);                   // 2-D
// out row j = a row indices[j]; scatter-add backward. Covers nearest-neighbor
// time up/downsampling.
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);        // [m x k][k x n]
Tensor add_rowvec(const Tensor& a, const Tensor& v);    // [R x C] + [C]
Tensor mul_rowvec(const Tensor& a, const Tensor& v);    // [R x C] * [C]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x[T x I], w[I x O], b[O]

// ---- normalization / regularization ---------------------------------------

Tensor softmax_rows(const Tensor& a);                   // 2-D
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Real eps = 1e-5);                     // x [T x D]
// GLU over columns: x [T x 2D] -> x[:, :D] * sigmoid(x[:, D:]).
Tensor glu_cols(const Tensor& x);
// Train-mode dropout with inverted scaling; identity when !train.
Tensor dropout(const Tensor& x, Real p, Rng& rng, bool train);

// Batch normalization over a list of [C x R_i] tensors: statistics per
// channel across every item and every non-channel element. Returns the
// normalized+affine outputs and writes the batch statistics used.
std::vector<Tensor> batch_norm_train(const std::vector<Tensor>& xs,
                                     const Tensor& gamma, const Tensor& beta,
                                     Real eps, std::vector<Real>* batch_mean,
                                     std::vector<Real>* batch_var);
std::vector<Tensor> batch_norm_eval(const std::vector<Tensor>& xs,
                                    const Tensor& gamma, const Tensor& beta,
                                    const std::vector<Real>& running_mean,
                                    const std::vector<Real>& running_var,
                                    Real eps);

// ---- convolutions (single item, channel-first) -----------------------------

Tensor reflection_pad1d(const Tensor& x, int left, int right);  // [C x T]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad, int dilation, int groups);  // x[Ci x T] w[Co x Ci/g x K]
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad, int output_pad);  // w[Ci x Co x K]
Tensor avg_pool1d(const Tensor& x, int kernel, int stride, int pad);  // count excludes padding
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);  // x[Ci x H x W], w[Co x Ci x Kh x Kw]
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b,
              const int stride[3], const int pad[3]);  // x[Ci x N x H x W]
Tensor max_pool3d(const Tensor& x, const int kernel[3], const int stride[3],
                  const int pad[3]);
Tensor adaptive_avg_pool_hw(const Tensor& x);  // [C x ... x H x W] -> mean over H,W per leading index

// ---- sequence kernels ------------------------------------------------------

// Single-direction LSTM, PyTorch gate order (i, f, g, o).
// x [T x D], w_ih [4H x D], w_hh [4H x H], b [4H]. Returns hidden states [T x H].
Tensor lstm(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh,
            const Tensor& b);

// Relative-position attention scores: S[i, j] = qv[i] . r[(i - j) + T - 1].
// qv [T x d], r [(2T-1) x d].
Tensor rel_pos_scores(const Tensor& qv, const Tensor& r);

// ---- DSP bridge ------------------------------------------------------------

struct StftSpec {
    int fft_size;
    int hop_size;
    int win_length;
    bool center = true;
};

// Differentiable STFT magnitude of a 1-D signal: x [T] -> [frames x bins].
Tensor stft_magnitude(const Tensor& x, const StftSpec& spec);

}  // namespace vts::nn
