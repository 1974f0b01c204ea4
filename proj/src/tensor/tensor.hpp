// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 2-D tensors of doubles with tape-free reverse-mode differentiation.
// Each op result keeps shared references to its parents and a closure that
// pushes its gradient back into them; `backward` walks that DAG once and then
// releases it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common/rng.hpp"

namespace malm {

struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::vector<double>& ensure_grad() {
        if (grad.empty()) {
            grad.assign(value.size(), 0.0);
        }
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor filled(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(std::size_t rows, std::size_t cols, double stddev, Rng& rng,
                        bool requires_grad = false);
    static Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng,
                          bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    std::size_t rows() const noexcept { return node_->rows; }
    std::size_t cols() const noexcept { return node_->cols; }
    std::size_t size() const noexcept { return node_->value.size(); }
    std::string shape_string() const;

    double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
    double item() const;

    std::span<const double> values() const noexcept { return node_->value; }
    /// Writable view; only meaningful on leaves (parameters, inputs).
    std::span<double> values_mut() noexcept { return node_->value; }
    std::vector<double> to_vector() const { return node_->value; }

    bool requires_grad() const noexcept { return node_->requires_grad; }
    void set_requires_grad(bool flag) noexcept { node_->requires_grad = flag; }
    bool has_grad() const noexcept { return !node_->grad.empty(); }
    std::span<const double> grad() const noexcept { return node_->grad; }
    std::span<double> grad_mut() noexcept { return node_->ensure_grad(); }
    void zero_grad() noexcept { node_->grad.clear(); }

    /// Value copy with no graph history.
    Tensor detach() const;
    Tensor clone(bool requires_grad) const;

    TensorNode* node() const noexcept { return node_.get(); }
    const std::shared_ptr<TensorNode>& shared() const noexcept { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

/// Boolean mask stored one byte per entry (1 = keep).
using Mask = std::vector<std::uint8_t>;

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ for a [m×k], b [n×k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise and broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a [m×n] + row [1×n] on every row.
Tensor add_row(const Tensor& a, const Tensor& row);
/// out[i][j] = col_a[i] + col_b[j] for column vectors [m×1], [n×1].
Tensor add_outer(const Tensor& col_a, const Tensor& col_b);

// Nonlinearities.
Tensor leaky_relu(const Tensor& x, double slope);
Tensor elu(const Tensor& x, double alpha = 1.0);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);

// Normalisation and probability.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Row-wise softmax; entries with mask 0 are exactly 0 and receive no gradient.
/// An empty mask means every entry is kept.
Tensor softmax_rows(const Tensor& x, const Mask& mask = {});
/// Sum over rows of -log softmax(row)[target], via log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

// Structure.
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor sum(const Tensor& x);

/// Inverted dropout: zero with probability `rate`, survivors scaled by
/// 1/(1-rate). Identity when `training` is false or `rate` is 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

/// Populates gradients of every requires-grad ancestor of a scalar `loss`,
/// accumulating into existing grads, then frees the backward graph.
void backward(const Tensor& loss);

/// Value-level masked softmax over one vector, max-stabilised.
std::vector<double> softmax_masked(std::span<const double> logits, std::span<const std::uint8_t> mask);

double leaky_relu(double x, double slope) noexcept;

}  // namespace malm
