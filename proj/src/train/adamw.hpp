// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "tensor/tensor.hpp"

namespace malm {

struct AdamWConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and bias-corrected moments. Parameters
/// without a populated grad are stepped with a zero gradient.
class AdamW {
public:
    explicit AdamW(AdamWConfig config) : config_(config) {}

    /// Returns false without touching any parameter when a gradient entry is
    /// non-finite.
    bool step(std::span<Tensor> params);

    std::size_t steps_taken() const noexcept { return t_; }
    const AdamWConfig& config() const noexcept { return config_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamWConfig config_;
    std::size_t t_ = 0;
    std::unordered_map<const TensorNode*, Moments> state_;
};

}  // namespace malm
