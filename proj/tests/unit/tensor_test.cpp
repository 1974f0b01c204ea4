// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "support.hpp"
#include "tensor/tensor.hpp"

namespace malm {
namespace {

using testing::check_gradients;

constexpr double kGradTol = 1e-6;

Tensor param(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    return Tensor::randn(r, c, scale, rng, true);
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Tensor probe(const Tensor& x, std::uint64_t seed = 99) {
    Rng rng(seed);
    return sum(mul(x, Tensor::randn(x.rows(), x.cols(), 1.0, rng)));
}

TEST(TensorForward, MatmulHandValues) {
    Tensor a = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from(3, 2, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    EXPECT_EQ(c.to_vector(), (std::vector<double>{58, 64, 139, 154}));
    Tensor d = matmul_nt(a, a);
    EXPECT_EQ(d.to_vector(), (std::vector<double>{14, 32, 32, 77}));
    EXPECT_EQ(transpose(a).to_vector(), (std::vector<double>{1, 4, 2, 5, 3, 6}));
}

TEST(TensorForward, ShapeMismatchIsDimensionError) {
    Tensor a = Tensor::zeros(2, 3);
    try {
        matmul(a, a);
        FAIL() << "expected a dimension error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dimension);
    }
}

TEST(TensorForward, MaskedSoftmaxZerosMaskedEntries) {
    Tensor x = Tensor::from(2, 3, {1.0, 2.0, 3.0, 0.5, -1.0, 4.0});
    Tensor y = softmax_rows(x, Mask{1, 0, 1, 0, 1, 1});
    EXPECT_EQ(y(0, 1), 0.0);
    EXPECT_EQ(y(1, 0), 0.0);
    const double z0 = std::exp(1.0) + std::exp(3.0);
    EXPECT_NEAR(y(0, 0), std::exp(1.0) / z0, 1e-15);
    EXPECT_NEAR(y(0, 2), std::exp(3.0) / z0, 1e-15);
    EXPECT_NEAR(y(1, 1) + y(1, 2), 1.0, 1e-15);
}

TEST(TensorForward, SoftmaxMaskedRejectsEmptyRow) {
    std::vector<double> logits{1.0, 2.0};
    std::vector<std::uint8_t> mask{0, 0};
    EXPECT_THROW(softmax_masked(logits, mask), Error);
}

TEST(TensorForward, CrossEntropyMatchesLogSumExp) {
    Tensor logits = Tensor::from(2, 3, {1000.0, 1001.0, 999.0, 0.1, 0.2, 0.3});
    std::vector<std::int32_t> targets{1, 0};
    const double lse0 = 1001.0 + std::log(std::exp(-1.0) + 1.0 + std::exp(-2.0));
    const double lse1 = std::log(std::exp(0.1) + std::exp(0.2) + std::exp(0.3));
    EXPECT_NEAR(cross_entropy(logits, targets).item(), (lse0 - 1001.0) + (lse1 - 0.1), 1e-12);
}

TEST(TensorForward, LayerNormStandardises) {
    Rng rng(3);
    Tensor x = Tensor::randn(4, 16, 3.0, rng);
    Tensor y = layer_norm(x, Tensor::filled(1, 16, 1.0), Tensor::zeros(1, 16));
    for (std::size_t r = 0; r < 4; ++r) {
        double mean = 0.0;
        double sq = 0.0;
        for (std::size_t c = 0; c < 16; ++c) {
            mean += y(r, c);
            sq += y(r, c) * y(r, c);
        }
        EXPECT_NEAR(mean / 16.0, 0.0, 1e-12);
        EXPECT_NEAR(sq / 16.0, 1.0, 1e-3);
    }
}

TEST(TensorForward, GeluTanhForm) {
    Tensor x = Tensor::from(1, 3, {-1.5, 0.0, 2.0});
    Tensor y = gelu(x);
    for (std::size_t i = 0; i < 3; ++i) {
        const double v = x(0, i);
        const double ref = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
        EXPECT_NEAR(y(0, i), ref, 1e-15);
    }
}

TEST(TensorForward, DropoutModes) {
    Rng rng(5);
    Tensor x = Tensor::filled(50, 40, 1.0);
    EXPECT_EQ(dropout(x, 0.5, rng, false).to_vector(), x.to_vector());
    EXPECT_EQ(dropout(x, 0.0, rng, true).to_vector(), x.to_vector());
    Tensor y = dropout(x, 0.25, rng, true);
    std::size_t zeros = 0;
    for (double v : y.values()) {
        if (v == 0.0) {
            ++zeros;
        } else {
            EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
        }
    }
    EXPECT_NEAR(static_cast<double>(zeros) / 2000.0, 0.25, 0.04);
    EXPECT_THROW(dropout(x, 1.0, rng, true), Error);
    EXPECT_THROW(dropout(x, -0.1, rng, true), Error);
}

TEST(TensorBackward, NonScalarLossRejected) {
    Tensor a = Tensor::zeros(2, 2, true);
    EXPECT_THROW(backward(scale(a, 2.0)), Error);
}

TEST(TensorBackward, NoGraphWithoutRequiresGrad) {
    Tensor a = Tensor::filled(2, 2, 1.0);
    Tensor b = matmul(a, a);
    EXPECT_FALSE(b.requires_grad());
    EXPECT_TRUE(b.node()->parents.empty());
}

TEST(TensorBackward, SharedSubexpressionAccumulates) {
    Tensor a = Tensor::from(1, 1, {3.0}, true);
    Tensor b = mul(a, a);
    backward(sum(add(b, b)));  // d/da 2a² = 4a
    EXPECT_DOUBLE_EQ(a.grad()[0], 12.0);
}

TEST(TensorGradients, LinearAlgebra) {
    Rng rng(11);
    Tensor a = param(3, 4, rng);
    Tensor b = param(4, 5, rng);
    Tensor c = param(5, 4, rng);
    EXPECT_LT(check_gradients([&] { return probe(matmul(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(matmul_nt(a, c)); }, {a, c}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(transpose(a)); }, {a}).max_rel_error, kGradTol);
}

TEST(TensorGradients, Elementwise) {
    Rng rng(12);
    Tensor a = param(3, 4, rng);
    Tensor b = param(3, 4, rng);
    Tensor row = param(1, 4, rng);
    Tensor ca = param(3, 1, rng);
    Tensor cb = param(5, 1, rng);
    EXPECT_LT(check_gradients([&] { return probe(add(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(sub(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(mul(a, b)); }, {a, b}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(scale(a, -2.5)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(add_row(a, row)); }, {a, row}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(add_outer(ca, cb)); }, {ca, cb}).max_rel_error, kGradTol);
}

TEST(TensorGradients, Nonlinearities) {
    Rng rng(13);
    Tensor a = param(4, 5, rng);
    EXPECT_LT(check_gradients([&] { return probe(leaky_relu(a, 0.2)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(elu(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(relu(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(tanh(a)); }, {a}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(gelu(a)); }, {a}).max_rel_error, kGradTol);
}

TEST(TensorGradients, NormalisationAndLoss) {
    Rng rng(14);
    Tensor x = param(3, 6, rng, 2.0);
    Tensor gain = param(1, 6, rng);
    Tensor bias = param(1, 6, rng);
    EXPECT_LT(check_gradients([&] { return probe(layer_norm(x, gain, bias)); }, {x, gain, bias}).max_rel_error,
              kGradTol);
    const Mask mask{1, 1, 0, 1, 0, 1, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 1};
    EXPECT_LT(check_gradients([&] { return probe(softmax_rows(x, mask)); }, {x}).max_rel_error, kGradTol);
    std::vector<std::int32_t> targets{2, 0, 5};
    EXPECT_LT(check_gradients([&] { return cross_entropy(x, targets); }, {x}).max_rel_error, kGradTol);
}

TEST(TensorGradients, Structure) {
    Rng rng(15);
    Tensor table = param(7, 3, rng);
    Tensor a = param(2, 3, rng);
    Tensor b = param(4, 3, rng);
    Tensor c = param(2, 5, rng);
    std::vector<std::int32_t> ids{1, 4, 1, 6};
    EXPECT_LT(check_gradients([&] { return probe(embedding(table, ids)); }, {table}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(concat_rows(std::vector<Tensor>{a, b})); }, {a, b}).max_rel_error,
              kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(concat_cols(std::vector<Tensor>{a, c})); }, {a, c}).max_rel_error,
              kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(slice_rows(b, 1, 2)); }, {b}).max_rel_error, kGradTol);
    EXPECT_LT(check_gradients([&] { return probe(slice_cols(c, 1, 3)); }, {c}).max_rel_error, kGradTol);
}

TEST(TensorGradients, DropoutUsesSameMaskForward) {
    Tensor a = Tensor::filled(3, 3, 2.0, true);
    Rng rng(1);
    Tensor y = dropout(a, 0.5, rng, true);
    backward(sum(y));
    for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_DOUBLE_EQ(a.grad()[i], y.values()[i] / 2.0);
    }
}

}  // namespace
}  // namespace malm
