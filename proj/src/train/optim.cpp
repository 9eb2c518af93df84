#include <cmath>

#include "vts/training.hpp"

namespace vts::training {

void OptimizerConfig::validate() const {
    if (lr <= 0.0) throw InvalidConfiguration("optimizer: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw InvalidConfiguration("optimizer: betas must be in [0, 1)");
    if (weight_decay < 0.0)
        throw InvalidConfiguration("optimizer: negative weight decay");
}

OptimizerConfig gan_adam() {
    OptimizerConfig c;
    c.kind = OptKind::adam;
    c.lr = 1e-4;
    c.beta1 = 0.5;
    c.beta2 = 0.99;
    return c;
}

OptimizerConfig mel_adamw() {
    OptimizerConfig c;
    c.kind = OptKind::adamw;
    c.lr = 1e-3;
    c.beta1 = 0.9;
    c.beta2 = 0.98;
    c.weight_decay = 1e-2;
    return c;
}

Optimizer::Optimizer(OptimizerConfig c) : cfg(c) { cfg.validate(); }

void Optimizer::add(const std::vector<std::pair<std::string, Tensor>>& named,
                    Real lr_mult) {
    for (const auto& [name, t] : named) {
        Slot s;
        s.name = name;
        s.p = t;
        s.p.set_requires_grad(true);
        s.m.assign(t.size(), 0.0);
        s.v.assign(t.size(), 0.0);
        s.lr_mult = lr_mult;
        slots.push_back(std::move(s));
    }
}

void Optimizer::set_lr_mult(const std::string& prefix, Real mult) {
    for (auto& s : slots)
        if (s.name.rfind(prefix, 0) == 0) s.lr_mult = mult;
}

void Optimizer::zero_grad() {
    for (auto& s : slots) s.p.zero_grad();
}

void Optimizer::step(Real lr, const std::vector<std::string>& roles) {
    for (auto& s : slots) {
        if (!roles.empty()) {
            bool match = false;
            for (const auto& r : roles)
                match = match || s.name.rfind(r + ".", 0) == 0;
            if (!match) continue;
        }
        if (s.lr_mult == 0.0) continue;
        Real eff = lr * s.lr_mult;
        ++s.t;
        Real bc1 = 1.0 - std::pow(cfg.beta1, static_cast<Real>(s.t));
        Real bc2 = 1.0 - std::pow(cfg.beta2, static_cast<Real>(s.t));
        auto& val = s.p.val();
        const auto& grad = s.p.grad();
        for (long i = 0; i < s.p.size(); ++i) {
            Real g = grad[i];
            if (cfg.kind == OptKind::adam && cfg.weight_decay > 0.0)
                g += cfg.weight_decay * val[i];
            if (cfg.kind == OptKind::adamw)
                val[i] -= eff * cfg.weight_decay * val[i];
            s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
            s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
            Real mhat = s.m[i] / bc1;
            Real vhat = s.v[i] / bc2;
            val[i] -= eff * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace vts::training
