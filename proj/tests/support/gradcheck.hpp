#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "vts/tensor.hpp"

namespace vts::testing {

// Central finite-difference gradient check. `f` rebuilds the graph from the
// current parameter values and returns the scalar loss. Returns the worst
// relative error max(|analytic - numeric|) / max(1, |analytic|, |numeric|).
inline double grad_check(std::vector<nn::Tensor> params,
                         const std::function<nn::Tensor()>& f,
                         double eps = 1e-5, bool richardson = false) {
    for (auto& p : params) p.set_requires_grad(true);
    nn::Tensor loss = f();
    for (auto& p : params) p.zero_grad();
    loss.backward();

    auto central = [&](nn::Tensor& p, long i, double h) {
        double orig = p.val()[i];
        p.val()[i] = orig + h;
        double up = f().item();
        p.val()[i] = orig - h;
        double dn = f().item();
        p.val()[i] = orig;
        return (up - dn) / (2.0 * h);
    };

    double worst = 0.0;
    for (auto& p : params) {
        std::vector<double> analytic = p.grad();
        for (long i = 0; i < p.size(); ++i) {
            double numeric = central(p, i, eps);
            if (richardson)
                numeric = (4.0 * central(p, i, eps / 2) - numeric) / 3.0;
            double denom = std::max(
                {1e-4, std::fabs(analytic[i]), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

// Same idea, but finite differences are taken on a random sample of `count`
// coordinates per tensor. Keeps checks on big modules affordable.
inline double grad_check_sampled(std::vector<nn::Tensor> params,
                                 const std::function<nn::Tensor()>& f,
                                 int count, std::uint64_t seed,
                                 double eps = 1e-5) {
    for (auto& p : params) p.set_requires_grad(true);
    nn::Tensor loss = f();
    for (auto& p : params) p.zero_grad();
    loss.backward();

    vts::Rng rng(seed);
    double worst = 0.0;
    for (auto& p : params) {
        std::vector<double> analytic = p.grad();
        int n = static_cast<int>(std::min<long>(count, p.size()));
        for (int c = 0; c < n; ++c) {
            long i = static_cast<long>(rng.below(p.size()));
            double orig = p.val()[i];
            p.val()[i] = orig + eps;
            double up = f().item();
            p.val()[i] = orig - eps;
            double dn = f().item();
            p.val()[i] = orig;
            double numeric = (up - dn) / (2.0 * eps);
            double denom = std::max(
                {1e-4, std::fabs(analytic[i]), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
        }
    }
    return worst;
}

inline nn::Tensor random_tensor(nn::Shape shape, vts::Rng& rng,
                                double scale = 0.5) {
    nn::Tensor t = nn::Tensor::zeros(shape);
    for (auto& v : t.val()) v = rng.uniform(-scale, scale);
    return t;
}

// Weighted sum of all elements, with fixed pseudo-random weights so every
// output entry influences the scalar differently.
inline nn::Tensor mix_to_scalar(const nn::Tensor& t) {
    nn::Tensor w = nn::Tensor::zeros(t.shape());
    for (long i = 0; i < t.size(); ++i)
        w.val()[i] = 0.25 + 0.5 * std::sin(0.7 * i + 0.3);
    return nn::sum(nn::mul(t, w));
}

}  // namespace vts::testing
