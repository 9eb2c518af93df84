#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "vts/tensor.hpp"

using namespace vts;
using namespace vts::nn;
using vts::testing::grad_check;
using vts::testing::mix_to_scalar;
using vts::testing::random_tensor;

TEST_CASE("elementwise ops and reductions gradcheck") {
    Rng rng(1);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    for (auto& v : b.val()) v += 1.5;  // keep divide/log well-conditioned

    CHECK(grad_check({a, b}, [&] {
              Tensor y = mul(add(a, b), sub(a, scale(b, 0.3)));
              y = add(y, divide(a, b));
              return mix_to_scalar(y);
          }) < 1e-6);
    CHECK(grad_check({a}, [&] {
              return mix_to_scalar(tanh_t(swish(sigmoid(a))));
          }) < 1e-6);
    CHECK(grad_check({b}, [&] {
              return mix_to_scalar(log_t(sqrt_t(b)));
          }) < 1e-6);
    CHECK(grad_check({a}, [&] {
              return mean(abs_t(leaky_relu(a, 0.2)));
          }) < 1e-5);
}

TEST_CASE("shape ops preserve values and gradients") {
    Rng rng(2);
    Tensor a = random_tensor({4, 6}, rng);
    CHECK(grad_check({a}, [&] {
              Tensor t = transpose2d(a);
              Tensor s = slice_cols(transpose2d(t), 1, 3);
              Tensor c = concat_cols({s, slice_rows(a, 0, 4)});
              return mix_to_scalar(c);
          }) < 1e-6);

    std::vector<int> idx{0, 0, 2, 3, 3, 3};
    Tensor g = gather_rows(a, idx);
    CHECK(g.dim(0) == 6);
    for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 6; ++k)
            CHECK(g.val()[j * 6 + k] == a.val()[idx[j] * 6 + k]);
    CHECK(grad_check({a}, [&] {
              return mix_to_scalar(gather_rows(a, idx));
          }) < 1e-6);
}

TEST_CASE("matmul and linear gradcheck") {
    Rng rng(3);
    Tensor x = random_tensor({5, 3}, rng);
    Tensor w = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    CHECK(grad_check({x, w, b}, [&] {
              return mix_to_scalar(linear(x, w, b));
          }) < 1e-6);
}

TEST_CASE("softmax rows sum to one, gradcheck") {
    Rng rng(4);
    Tensor a = random_tensor({3, 5}, rng, 2.0);
    Tensor s = softmax_rows(a);
    for (int i = 0; i < 3; ++i) {
        double row = 0;
        for (int j = 0; j < 5; ++j) row += s.val()[i * 5 + j];
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(grad_check({a}, [&] {
              return mix_to_scalar(softmax_rows(a));
          }) < 1e-6);
}

TEST_CASE("layer norm normalizes rows, gradcheck") {
    Rng rng(5);
    Tensor x = random_tensor({4, 8}, rng, 2.0);
    Tensor g = Tensor::full({8}, 1.0);
    Tensor b = Tensor::zeros({8});
    Tensor y = layer_norm(x, g, b);
    for (int i = 0; i < 4; ++i) {
        double m = 0;
        for (int j = 0; j < 8; ++j) m += y.val()[i * 8 + j];
        CHECK(std::fabs(m / 8) < 1e-10);
    }
    Tensor g2 = random_tensor({8}, rng);
    Tensor b2 = random_tensor({8}, rng);
    CHECK(grad_check({x, g2, b2}, [&] {
              return mix_to_scalar(layer_norm(x, g2, b2));
          }) < 1e-5);
}

TEST_CASE("batch norm train: unit stats out, coupled gradient") {
    Rng rng(6);
    std::vector<Tensor> xs{random_tensor({3, 7}, rng, 2.0),
                           random_tensor({3, 5}, rng, 2.0)};
    Tensor g = Tensor::full({3}, 1.0);
    Tensor b = Tensor::zeros({3});
    std::vector<double> bm, bv;
    auto ys = batch_norm_train(xs, g, b, 1e-5, &bm, &bv);
    // normalized output: per-channel mean ~0, var ~1
    for (int c = 0; c < 3; ++c) {
        double m = 0;
        long n = 0;
        for (const auto& y : ys)
            for (int t = 0; t < y.dim(1); ++t) {
                m += y.val()[c * y.dim(1) + t];
                ++n;
            }
        CHECK(std::fabs(m / n) < 1e-10);
    }
    Tensor g2 = random_tensor({3}, rng);
    Tensor b2 = random_tensor({3}, rng);
    CHECK(grad_check({xs[0], xs[1], g2, b2}, [&] {
              auto out = batch_norm_train(xs, g2, b2, 1e-5, nullptr, nullptr);
              return add(mix_to_scalar(out[0]), mix_to_scalar(out[1]));
          }) < 1e-5);
}

TEST_CASE("batch norm eval matches closed form, gradcheck") {
    Rng rng(7);
    std::vector<Tensor> xs{random_tensor({2, 6}, rng)};
    Tensor g = random_tensor({2}, rng);
    Tensor b = random_tensor({2}, rng);
    std::vector<double> m{0.3, -0.1}, v{1.5, 0.7};
    auto ys = batch_norm_eval(xs, g, b, m, v, 1e-5);
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 6; ++t) {
            double expect = (xs[0].val()[c * 6 + t] - m[c]) /
                                std::sqrt(v[c] + 1e-5) * g.val()[c] +
                            b.val()[c];
            CHECK(ys[0].val()[c * 6 + t] == doctest::Approx(expect));
        }
    CHECK(grad_check({xs[0], g, b}, [&] {
              auto out = batch_norm_eval(xs, g, b, m, v, 1e-5);
              return mix_to_scalar(out[0]);
          }) < 1e-6);
}

TEST_CASE("conv1d shapes, groups, dilation, gradcheck") {
    Rng rng(8);
    Tensor x = random_tensor({4, 10}, rng);
    Tensor w = random_tensor({6, 2, 3}, rng);  // groups=2
    Tensor b = random_tensor({6}, rng);
    Tensor y = conv1d(x, w, b, 1, 1, 1, 2);
    CHECK(y.dim(0) == 6);
    CHECK(y.dim(1) == 10);
    CHECK(grad_check({x, w, b}, [&] {
              return mix_to_scalar(conv1d(x, w, b, 1, 1, 1, 2));
          }) < 1e-5);
    // dilation 3 with pad 3 preserves length
    Tensor w2 = random_tensor({4, 4, 3}, rng);
    Tensor b2 = random_tensor({4}, rng);
    Tensor y2 = conv1d(x, w2, b2, 1, 3, 3, 1);
    CHECK(y2.dim(1) == 10);
    CHECK(grad_check({x, w2, b2}, [&] {
              return mix_to_scalar(conv1d(x, w2, b2, 1, 3, 3, 1));
          }) < 1e-5);
}

TEST_CASE("conv_transpose1d length arithmetic and gradcheck") {
    Rng rng(9);
    Tensor x = random_tensor({3, 5}, rng);
    Tensor w = random_tensor({3, 2, 10}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor y = conv_transpose1d(x, w, b, 5, 3, 1);
    CHECK(y.dim(0) == 2);
    CHECK(y.dim(1) == (5 - 1) * 5 - 6 + 10 + 1);
    CHECK(grad_check({x, w, b}, [&] {
              return mix_to_scalar(conv_transpose1d(x, w, b, 5, 3, 1));
          }) < 1e-5);
}

TEST_CASE("reflection pad and avg pool gradcheck") {
    Rng rng(10);
    Tensor x = random_tensor({2, 8}, rng);
    Tensor p = reflection_pad1d(x, 3, 3);
    CHECK(p.dim(1) == 14);
    CHECK(p.val()[0] == x.val()[3]);
    CHECK(grad_check({x}, [&] {
              return mix_to_scalar(reflection_pad1d(x, 2, 2));
          }) < 1e-6);
    Tensor a = avg_pool1d(x, 4, 2, 1);
    CHECK(a.dim(1) == 4);  // halves length
    CHECK(grad_check({x}, [&] {
              return mix_to_scalar(avg_pool1d(x, 4, 2, 1));
          }) < 1e-6);
}

TEST_CASE("conv2d / conv3d / pools gradcheck") {
    Rng rng(11);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor y = conv2d(x, w, b, 2, 1);
    CHECK(y.dim(1) == 3);
    CHECK(grad_check({x, w, b}, [&] {
              return mix_to_scalar(conv2d(x, w, b, 2, 1));
          }) < 1e-5);

    Tensor x3 = random_tensor({2, 4, 5, 5}, rng);
    Tensor w3 = random_tensor({3, 2, 3, 3, 3}, rng);
    Tensor b3 = random_tensor({3}, rng);
    int stride[3] = {1, 2, 2};
    int pad[3] = {1, 1, 1};
    Tensor y3 = conv3d(x3, w3, b3, stride, pad);
    CHECK(y3.dim(1) == 4);
    CHECK(y3.dim(2) == 3);
    CHECK(grad_check({x3, w3, b3}, [&] {
              return mix_to_scalar(conv3d(x3, w3, b3, stride, pad));
          }) < 1e-5);

    int k[3] = {1, 3, 3}, s[3] = {1, 2, 2}, p3[3] = {0, 1, 1};
    Tensor mp = max_pool3d(x3, k, s, p3);
    CHECK(mp.dim(2) == 3);
    CHECK(grad_check({x3}, [&] {
              return mix_to_scalar(max_pool3d(x3, k, s, p3));
          }) < 1e-5);

    Tensor im = random_tensor({3, 4, 4}, rng);
    CHECK(grad_check({im}, [&] {
              return mix_to_scalar(adaptive_avg_pool_hw(im));
          }) < 1e-6);
}

TEST_CASE("lstm: zero weights give zero output; gradcheck") {
    Rng rng(12);
    int T = 5, D = 4, H = 3;
    Tensor x = random_tensor({T, D}, rng);
    Tensor wih0 = Tensor::zeros({4 * H, D});
    Tensor whh0 = Tensor::zeros({4 * H, H});
    Tensor b0 = Tensor::zeros({4 * H});
    Tensor y0 = lstm(x, wih0, whh0, b0);
    for (auto v : y0.val()) CHECK(v == 0.0);

    Tensor wih = random_tensor({4 * H, D}, rng);
    Tensor whh = random_tensor({4 * H, H}, rng);
    Tensor b = random_tensor({4 * H}, rng);
    CHECK(grad_check({x, wih, whh, b}, [&] {
              return mix_to_scalar(lstm(x, wih, whh, b));
          }) < 1e-5);
}

TEST_CASE("rel_pos_scores matches direct dot products, gradcheck") {
    Rng rng(13);
    int T = 4, d = 3;
    Tensor q = random_tensor({T, d}, rng);
    Tensor r = random_tensor({2 * T - 1, d}, rng);
    Tensor s = rel_pos_scores(q, r);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            double expect = 0;
            for (int k = 0; k < d; ++k)
                expect += q.val()[i * d + k] * r.val()[(i - j + T - 1) * d + k];
            CHECK(s.val()[i * T + j] == doctest::Approx(expect));
        }
    CHECK(grad_check({q, r}, [&] {
              return mix_to_scalar(rel_pos_scores(q, r));
          }) < 1e-6);
}

TEST_CASE("stft_magnitude gradcheck on a short signal") {
    Rng rng(14);
    Tensor x = random_tensor({64}, rng);
    nn::StftSpec spec{16, 4, 16, true};
    Tensor m = stft_magnitude(x, spec);
    CHECK(m.dim(0) == 64 / 4 + 1);
    CHECK(m.dim(1) == 9);
    CHECK(grad_check({x}, [&] {
              return mix_to_scalar(stft_magnitude(x, spec));
          }, 1e-6) < 1e-4);
}

TEST_CASE("glu and dropout") {
    Rng rng(15);
    Tensor x = random_tensor({3, 8}, rng);
    Tensor y = glu_cols(x);
    CHECK(y.dim(1) == 4);
    CHECK(grad_check({x}, [&] { return mix_to_scalar(glu_cols(x)); }) < 1e-6);

    Rng drop_rng(99);
    Tensor d_eval = dropout(x, 0.5, drop_rng, false);
    for (long i = 0; i < x.size(); ++i) CHECK(d_eval.val()[i] == x.val()[i]);
}
