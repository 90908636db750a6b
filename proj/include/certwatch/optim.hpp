#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "certwatch/autodiff.hpp"

namespace certwatch {

// A trainable tensor: the autodiff leaf plus Adam moment buffers.
struct Parameter {
    Var node;       // value + grad
    Tensor m;       // first moment
    Tensor v;       // second moment
    std::int64_t step_count = 0;

    explicit Parameter(Tensor value)
        : node(leaf(std::move(value), true)),
          m(node->value.shape),
          v(node->value.shape) {}

    Tensor& value() { return node->value; }
    const Tensor& value() const { return node->value; }
    Tensor& grad() { return node->grad; }
    void zero_grad() { node->zero_grad(); }
};

struct AdamConfig {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Bias-corrected Adam update over already-populated gradients.
inline void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
    for (Parameter* p : params) {
        p->step_count += 1;
        const double t = static_cast<double>(p->step_count);
        const float bc1 = 1.0f - static_cast<float>(std::pow(cfg.beta1, t));
        const float bc2 = 1.0f - static_cast<float>(std::pow(cfg.beta2, t));
        Tensor& w = p->value();
        const Tensor& g = p->node->grad;
        for (int i = 0; i < w.numel(); ++i) {
            p->m[i] = cfg.beta1 * p->m[i] + (1.0f - cfg.beta1) * g[i];
            p->v[i] = cfg.beta2 * p->v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
            float mhat = p->m[i] / bc1;
            float vhat = p->v[i] / bc2;
            w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

inline void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

} // namespace certwatch
