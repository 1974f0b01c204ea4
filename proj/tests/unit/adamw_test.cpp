// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "train/adamw.hpp"

namespace malm {
namespace {

// Scalar reference written out step by step.
struct ScalarAdamW {
    AdamWConfig c;
    double m = 0.0;
    double v = 0.0;
    int t = 0;

    double step(double p, double g) {
        ++t;
        m = c.beta1 * m + (1 - c.beta1) * g;
        v = c.beta2 * v + (1 - c.beta2) * g * g;
        const double mh = m / (1 - std::pow(c.beta1, t));
        const double vh = v / (1 - std::pow(c.beta2, t));
        p -= c.lr * c.weight_decay * p;
        return p - c.lr * mh / (std::sqrt(vh) + c.eps);
    }
};

TEST(AdamW, FirstStepMovesByLearningRate) {
    AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.0};
    Tensor p = Tensor::from(1, 2, {1.0, -2.0}, true);
    p.grad_mut()[0] = 3.0;
    p.grad_mut()[1] = -0.5;
    AdamW opt(cfg);
    std::vector<Tensor> ps{p};
    ASSERT_TRUE(opt.step(ps));
    // m̂ = g, v̂ = g², so the update is lr · sign(g) up to eps.
    EXPECT_NEAR(p.values()[0], 0.9, 1e-8);
    EXPECT_NEAR(p.values()[1], -1.9, 1e-8);
}

TEST(AdamW, MatchesScalarReferenceOverSteps) {
    AdamWConfig cfg{5e-3, 0.9, 0.99, 1e-8, 0.05};
    ScalarAdamW ref{cfg};
    Tensor p = Tensor::from(1, 1, {0.7}, true);
    AdamW opt(cfg);
    std::vector<Tensor> ps{p};
    double expected = 0.7;
    for (int t = 0; t < 25; ++t) {
        const double g = std::sin(0.3 * t) + 0.2;
        p.zero_grad();
        p.grad_mut()[0] = g;
        opt.step(ps);
        expected = ref.step(expected, g);
        EXPECT_NEAR(p.values()[0], expected, 1e-14) << "step " << t;
    }
    EXPECT_EQ(opt.steps_taken(), 25u);
}

TEST(AdamW, DecoupledDecayWithZeroGradient) {
    AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.5};
    Tensor p = Tensor::from(1, 1, {2.0}, true);
    AdamW opt(cfg);
    std::vector<Tensor> ps{p};
    opt.step(ps);
    EXPECT_DOUBLE_EQ(p.values()[0], 2.0 * (1.0 - 0.1 * 0.5));
}

TEST(AdamW, ZeroLearningRateLeavesParameters) {
    AdamWConfig cfg{0.0, 0.9, 0.999, 1e-8, 0.01};
    Tensor p = Tensor::from(1, 3, {0.1, 0.2, 0.3}, true);
    p.grad_mut()[1] = 4.0;
    AdamW opt(cfg);
    std::vector<Tensor> ps{p};
    opt.step(ps);
    EXPECT_EQ(p.to_vector(), (std::vector<double>{0.1, 0.2, 0.3}));
}

TEST(AdamW, NonFiniteGradientSkipsStep) {
    Tensor p = Tensor::from(1, 2, {1.0, 1.0}, true);
    p.grad_mut()[0] = 1.0;
    p.grad_mut()[1] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt(AdamWConfig{});
    std::vector<Tensor> ps{p};
    EXPECT_FALSE(opt.step(ps));
    EXPECT_EQ(p.to_vector(), (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(opt.steps_taken(), 0u);
}

}  // namespace
}  // namespace malm
