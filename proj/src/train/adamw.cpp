// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "train/adamw.hpp"

#include <cmath>

namespace malm {

bool AdamW::step(std::span<Tensor> params) {
    for (const Tensor& p : params) {
        for (double g : p.grad()) {
            if (!std::isfinite(g)) {
                return false;
            }
        }
    }
    ++t_;
    const auto& c = config_;
    const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
    const double decay = 1.0 - c.lr * c.weight_decay;
    for (Tensor& p : params) {
        Moments& mom = state_[p.node()];
        auto values = p.values_mut();
        if (mom.m.empty()) {
            mom.m.assign(values.size(), 0.0);
            mom.v.assign(values.size(), 0.0);
        }
        auto grad = p.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
            mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = mom.m[i] / bias1;
            const double v_hat = mom.v[i] / bias2;
            values[i] = values[i] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
    return true;
}

}  // namespace malm
