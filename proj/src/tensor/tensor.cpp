// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "common/error.hpp"

namespace malm {
namespace {

using NodePtr = std::shared_ptr<TensorNode>;

std::string shape_of(const Tensor& t) { return t.shape_string(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorKind::dimension,
             std::string(op) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
    }
}

// Creates the result node; records parents and the backward closure only when
// some parent participates in differentiation.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value, const char* op,
                   std::initializer_list<Tensor> parents,
                   std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    for (const Tensor& p : parents) {
        needs = needs || p.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        for (const Tensor& p : parents) {
            node->parents.push_back(p.shared());
        }
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

Tensor make_result_n(std::size_t rows, std::size_t cols, std::vector<double> value, const char* op,
                     std::span<const Tensor> parents, std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(value);
    node->op = op;
    bool needs = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        for (const Tensor& p : parents) {
            node->parents.push_back(p.shared());
        }
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

// c[m×n] += a[m×k] · b[k×n]; accumulation order over k is fixed per element so
// each output row depends only on the matching input row.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

// c[m×n] += a[m×k] · b[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            c[i * n + j] += acc;
        }
    }
}

// c[k×n] += a[m×k]ᵀ · b[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) {
                continue;
            }
            double* cp = c + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                cp[j] += av * bi[j];
            }
        }
    }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
    std::vector<double> out(x.size());
    auto xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(xv[i]);
    }
    return make_result(x.rows(), x.cols(), std::move(out), op, {x}, [deriv](TensorNode& self) {
        TensorNode& in = *self.parents[0];
        if (!in.requires_grad) {
            return;
        }
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return filled(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    if (values.size() != rows * cols) {
        fail(ErrorKind::dimension, "tensor: " + std::to_string(values.size()) + " values for shape [" +
                                       std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

Tensor Tensor::randn(std::size_t rows, std::size_t cols, double stddev, Rng& rng, bool requires_grad) {
    std::vector<double> v(rows * cols);
    for (double& x : v) {
        x = stddev * rng.normal();
    }
    return from(rows, cols, std::move(v), requires_grad);
}

Tensor Tensor::uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng, bool requires_grad) {
    std::vector<double> v(rows * cols);
    for (double& x : v) {
        x = rng.uniform(-bound, bound);
    }
    return from(rows, cols, std::move(v), requires_grad);
}

std::string Tensor::shape_string() const {
    if (!node_) {
        return "[undefined]";
    }
    return "[" + std::to_string(node_->rows) + "x" + std::to_string(node_->cols) + "]";
}

double Tensor::item() const {
    if (size() != 1) {
        fail(ErrorKind::dimension, "item() on non-scalar tensor " + shape_string());
    }
    return node_->value[0];
}

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

Tensor Tensor::clone(bool requires_grad) const { return from(rows(), cols(), node_->value, requires_grad); }

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        fail(ErrorKind::dimension, "matmul: inner dimensions disagree " + shape_of(a) + " x " + shape_of(b));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
    return make_result(m, n, std::move(out), "matmul", {a, b}, [m, k, n](TensorNode& self) {
        TensorNode& A = *self.parents[0];
        TensorNode& B = *self.parents[1];
        if (A.requires_grad) {
            gemm_nt(self.grad.data(), B.value.data(), A.ensure_grad().data(), m, n, k);
        }
        if (B.requires_grad) {
            gemm_tn(A.value.data(), self.grad.data(), B.ensure_grad().data(), m, k, n);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::dimension, "matmul_nt: inner dimensions disagree " + shape_of(a) + " x " + shape_of(b) + "^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<double> out(m * n, 0.0);
    gemm_nt(a.values().data(), b.values().data(), out.data(), m, k, n);
    return make_result(m, n, std::move(out), "matmul_nt", {a, b}, [m, k, n](TensorNode& self) {
        TensorNode& A = *self.parents[0];
        TensorNode& B = *self.parents[1];
        if (A.requires_grad) {
            gemm_nn(self.grad.data(), B.value.data(), A.ensure_grad().data(), m, n, k);
        }
        if (B.requires_grad) {
            gemm_tn(self.grad.data(), A.value.data(), B.ensure_grad().data(), m, n, k);
        }
    });
}

Tensor transpose(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    auto av = a.values();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[j * r + i] = av[i * c + j];
        }
    }
    return make_result(c, r, std::move(out), "transpose", {a}, [r, c](TensorNode& self) {
        TensorNode& A = *self.parents[0];
        auto& g = A.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += self.grad[j * r + i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] + b.values()[i];
    }
    return make_result(a.rows(), a.cols(), std::move(out), "add", {a, b}, [](TensorNode& self) {
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] - b.values()[i];
    }
    return make_result(a.rows(), a.cols(), std::move(out), "sub", {a, b}, [](TensorNode& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] * b.values()[i];
    }
    return make_result(a.rows(), a.cols(), std::move(out), "mul", {a, b}, [](TensorNode& self) {
        TensorNode& A = *self.parents[0];
        TensorNode& B = *self.parents[1];
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * B.value[i];
            }
        }
        if (B.requires_grad) {
            auto& g = B.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * A.value[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] * factor;
    }
    return make_result(a.rows(), a.cols(), std::move(out), "scale", {a}, [factor](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * factor;
        }
    });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        fail(ErrorKind::dimension, "add_row: row " + shape_of(row) + " does not broadcast over " + shape_of(a));
    }
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = a.values()[i * c + j] + row.values()[j];
        }
    }
    return make_result(r, c, std::move(out), "add_row", {a, row}, [r, c](TensorNode& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    g[j] += self.grad[i * c + j];
                }
            }
        }
    });
}

Tensor add_outer(const Tensor& col_a, const Tensor& col_b) {
    if (col_a.cols() != 1 || col_b.cols() != 1) {
        fail(ErrorKind::dimension, "add_outer: expected column vectors, got " + shape_of(col_a) + " and " + shape_of(col_b));
    }
    const std::size_t m = col_a.rows(), n = col_b.rows();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = col_a.values()[i] + col_b.values()[j];
        }
    }
    return make_result(m, n, std::move(out), "add_outer", {col_a, col_b}, [m, n](TensorNode& self) {
        TensorNode& A = *self.parents[0];
        TensorNode& B = *self.parents[1];
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    g[i] += self.grad[i * n + j];
                }
            }
        }
        if (B.requires_grad) {
            auto& g = B.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    g[j] += self.grad[i * n + j];
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Nonlinearities

double leaky_relu(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, "leaky_relu", [slope](double v) { return leaky_relu(v, slope); },
        [slope](double in, double) { return in >= 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& x, double alpha) {
    return unary(
        x, "elu", [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
        [alpha](double in, double out) { return in > 0.0 ? 1.0 : out + alpha; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor gelu(const Tensor& x) {
    // tanh approximation
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double k = 0.044715;
    return unary(
        x, "gelu",
        [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
        [](double v, double) {
            const double u = c * (v + k * v * v * v);
            const double t = std::tanh(u);
            const double du = c * (1.0 + 3.0 * k * v * v);
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
        });
}

// ---------------------------------------------------------------------------
// Normalisation and probability

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
        fail(ErrorKind::dimension, "layer_norm: gain " + shape_of(gain) + " / bias " + shape_of(bias) +
                                       " do not match " + shape_of(x));
    }
    std::vector<double> out(x.size());
    std::vector<double> xhat(x.size());
    std::vector<double> inv_std(r);
    auto xv = x.values();
    auto gv = gain.values();
    auto bv = bias.values();
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            mean += xv[i * c + j];
        }
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = xv[i * c + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat[i * c + j] = (xv[i * c + j] - mean) * inv_std[i];
            out[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
        }
    }
    return make_result(r, c, std::move(out), "layer_norm", {x, gain, bias},
                       [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& self) {
                           TensorNode& X = *self.parents[0];
                           TensorNode& G = *self.parents[1];
                           TensorNode& B = *self.parents[2];
                           if (G.requires_grad || B.requires_grad) {
                               auto& gg = G.ensure_grad();
                               auto& bg = B.ensure_grad();
                               for (std::size_t i = 0; i < r; ++i) {
                                   for (std::size_t j = 0; j < c; ++j) {
                                       gg[j] += self.grad[i * c + j] * xhat[i * c + j];
                                       bg[j] += self.grad[i * c + j];
                                   }
                               }
                           }
                           if (X.requires_grad) {
                               auto& xg = X.ensure_grad();
                               const double inv_c = 1.0 / static_cast<double>(c);
                               for (std::size_t i = 0; i < r; ++i) {
                                   double mean_dy = 0.0;
                                   double mean_dy_xhat = 0.0;
                                   for (std::size_t j = 0; j < c; ++j) {
                                       const double dy = self.grad[i * c + j] * G.value[j];
                                       mean_dy += dy;
                                       mean_dy_xhat += dy * xhat[i * c + j];
                                   }
                                   mean_dy *= inv_c;
                                   mean_dy_xhat *= inv_c;
                                   for (std::size_t j = 0; j < c; ++j) {
                                       const double dy = self.grad[i * c + j] * G.value[j];
                                       xg[i * c + j] += inv_std[i] * (dy - mean_dy - xhat[i * c + j] * mean_dy_xhat);
                                   }
                               }
                           }
                       });
}

std::vector<double> softmax_masked(std::span<const double> logits, std::span<const std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != logits.size()) {
        fail(ErrorKind::dimension, "softmax_masked: mask length " + std::to_string(mask.size()) +
                                       " != logits length " + std::to_string(logits.size()));
    }
    auto keep = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (keep(i)) {
            mx = std::max(mx, logits[i]);
            any = true;
        }
    }
    if (!any) {
        fail(ErrorKind::structural, "softmax_masked: empty neighborhood (every entry masked)");
    }
    std::vector<double> out(logits.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (keep(i)) {
            out[i] = std::exp(logits[i] - mx);
            total += out[i];
        }
    }
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (keep(i)) {
            out[i] /= total;
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& x, const Mask& mask) {
    const std::size_t r = x.rows(), c = x.cols();
    if (!mask.empty() && mask.size() != x.size()) {
        fail(ErrorKind::dimension, "softmax_rows: mask size " + std::to_string(mask.size()) + " for " + shape_of(x));
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        std::span<const double> row = x.values().subspan(i * c, c);
        std::span<const std::uint8_t> mrow;
        if (!mask.empty()) {
            mrow = std::span<const std::uint8_t>(mask).subspan(i * c, c);
        }
        auto p = softmax_masked(row, mrow);
        std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return make_result(r, c, std::move(out), "softmax_rows", {x}, [r, c](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dot += self.grad[i * c + j] * self.value[i * c + j];
            }
            // masked entries have value 0, so they receive no gradient
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
            }
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
    const std::size_t r = logits.rows(), c = logits.cols();
    if (targets.size() != r) {
        fail(ErrorKind::dimension, "cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                                       shape_of(logits));
    }
    std::vector<double> probs(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const auto t = targets[i];
        if (t < 0 || static_cast<std::size_t>(t) >= c) {
            fail(ErrorKind::invalid_argument, "cross_entropy: target " + std::to_string(t) + " out of range");
        }
        auto row = logits.values().subspan(i * c, c);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] = std::exp(row[j] - mx);
            total += probs[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] /= total;
        }
        loss += (mx + std::log(total)) - row[static_cast<std::size_t>(t)];
    }
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    return make_result(1, 1, {loss}, "cross_entropy", {logits},
                       [r, c, probs = std::move(probs), tgt = std::move(tgt)](TensorNode& self) {
                           auto& g = self.parents[0]->ensure_grad();
                           const double up = self.grad[0];
                           for (std::size_t i = 0; i < r; ++i) {
                               for (std::size_t j = 0; j < c; ++j) {
                                   g[i * c + j] += up * probs[i * c + j];
                               }
                               g[i * c + static_cast<std::size_t>(tgt[i])] -= up;
                           }
                       });
}

// ---------------------------------------------------------------------------
// Structure

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
    const std::size_t c = table.cols();
    std::vector<double> out(ids.size() * c);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
            fail(ErrorKind::invalid_argument, "embedding: id " + std::to_string(ids[i]) + " outside table " +
                                                  shape_of(table));
        }
        auto row = table.values().subspan(static_cast<std::size_t>(ids[i]) * c, c);
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    std::vector<std::int32_t> keep(ids.begin(), ids.end());
    return make_result(ids.size(), c, std::move(out), "embedding", {table}, [c, keep = std::move(keep)](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < keep.size(); ++i) {
            double* dst = g.data() + static_cast<std::size_t>(keep[i]) * c;
            for (std::size_t j = 0; j < c; ++j) {
                dst[j] += self.grad[i * c + j];
            }
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        fail(ErrorKind::invalid_argument, "concat_cols: no parts");
    }
    const std::size_t r = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rows() != r) {
            fail(ErrorKind::dimension, "concat_cols: row mismatch " + shape_of(parts[0]) + " vs " + shape_of(p));
        }
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < p.cols(); ++j) {
                out[i * total + offset + j] = p(i, j);
            }
        }
        offset += p.cols();
    }
    return make_result_n(r, total, std::move(out), "concat_cols", parts, [r, total, widths](TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            TensorNode& P = *self.parents[k];
            if (P.requires_grad) {
                auto& g = P.ensure_grad();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < widths[k]; ++j) {
                        g[i * widths[k] + j] += self.grad[i * total + off + j];
                    }
                }
            }
            off += widths[k];
        }
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        fail(ErrorKind::invalid_argument, "concat_rows: no parts");
    }
    const std::size_t c = parts[0].cols();
    std::size_t rows = 0;
    std::vector<double> out;
    for (const Tensor& p : parts) {
        if (p.cols() != c) {
            fail(ErrorKind::dimension, "concat_rows: column mismatch " + shape_of(parts[0]) + " vs " + shape_of(p));
        }
        rows += p.rows();
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return make_result_n(rows, c, std::move(out), "concat_rows", parts, [](TensorNode& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.size();
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] += self.grad[off + i];
                }
            }
            off += n;
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    if (begin + count > x.rows()) {
        fail(ErrorKind::dimension, "slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                       ") outside " + shape_of(x));
    }
    const std::size_t c = x.cols();
    auto src = x.values().subspan(begin * c, count * c);
    std::vector<double> out(src.begin(), src.end());
    return make_result(count, c, std::move(out), "slice_rows", {x}, [begin, c](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            g[begin * c + i] += self.grad[i];
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    if (begin + count > x.cols()) {
        fail(ErrorKind::dimension, "slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                       ") outside " + shape_of(x));
    }
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * count);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            out[i * count + j] = x.values()[i * c + begin + j];
        }
    }
    return make_result(r, count, std::move(out), "slice_cols", {x}, [r, c, begin, count](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < count; ++j) {
                g[i * c + begin + j] += self.grad[i * count + j];
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += v;
    }
    return make_result(1, 1, {total}, "sum", {x}, [](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (double& v : g) {
            v += self.grad[0];
        }
    });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        fail(ErrorKind::invalid_argument, "dropout: rate " + std::to_string(rate) + " outside [0, 1)");
    }
    if (!training || rate == 0.0) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> gate(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < gate.size(); ++i) {
        gate[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        out[i] = x.values()[i] * gate[i];
    }
    return make_result(x.rows(), x.cols(), std::move(out), "dropout", {x}, [gate = std::move(gate)](TensorNode& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * gate[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Backward

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        fail(ErrorKind::invalid_argument, "backward: loss must be a scalar, got " + loss.shape_string());
    }
    TensorNode* root = loss.node();
    if (!root->requires_grad) {
        return;
    }
    // iterative post-order DFS
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && !seen.count(parent)) {
                seen.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
    }
    for (TensorNode* node : order) {
        if (node->backward_fn) {
            node->backward_fn = nullptr;
            node->parents.clear();
        }
    }
}

}  // namespace malm
