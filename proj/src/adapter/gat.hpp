// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-head graph attention over the input / partial-output / knowledge graph
// and the weighted-residual blend with the foundation logits.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapter/graph.hpp"
#include "common/rng.hpp"
#include "lm/checkpoint.hpp"
#include "tensor/tensor.hpp"

namespace malm {

enum class Activation { elu, relu, tanh, identity };

const char* activation_name(Activation a) noexcept;
Activation parse_activation(const std::string& name);

struct AdapterConfig {
    std::size_t layers = 2;      // L; 0 bypasses the adapter
    std::size_t heads = 8;       // H
    double residual = 0.2;       // λ
    double dropout = 0.1;        // on attention coefficients and layer outputs
    double leaky_slope = 0.2;    // slope of the attention LeakyReLU
    Activation activation = Activation::elu;  // σ applied per head
    Ablation ablation;

    void validate() const;
    nlohmann::json to_json() const;
    static AdapterConfig from_json(const nlohmann::json& j);
};

struct GatHead {
    Tensor proj;  // d × d′, applied as X · proj
    Tensor attn;  // 2d′ × 1; rows [0, d′) score the source, [d′, 2d′) the target
};

struct GatLayer {
    std::vector<GatHead> heads;
    Tensor out;  // (H·d′) × d
};

struct AdapterParams {
    std::size_t width = 0;
    std::vector<GatLayer> layers;

    /// Glorot-uniform initialisation; d′ = width / heads.
    static AdapterParams init(std::size_t width, const AdapterConfig& config, Rng& rng);

    std::vector<Tensor> trainables() const;
    std::size_t scalar_count() const;
    AdapterParams clone() const;

    CheckpointSection to_section(const AdapterConfig& config) const;
    static AdapterParams from_section(const CheckpointSection& section, const AdapterConfig& config);
};

/// Attention rows recorded during a forward pass: per head, an N × N matrix
/// whose row q holds α over the sources of q.
struct LayerTrace {
    std::vector<std::vector<double>> attention;
};

/// α of node q over `neighbors` for one head, evaluated directly from the
/// features (value only, no dropout).
std::vector<double> attention_scores(std::size_t q, std::span<const std::size_t> neighbors, const Tensor& features,
                                     const GatHead& head, double leaky_slope);

/// One attention layer. Every node is updated from its own neighbourhood.
Tensor gat_layer(const Tensor& features, const Adjacency& adjacency, const GatLayer& layer,
                 const AdapterConfig& config, Rng& rng, bool training, std::size_t layer_index = 0,
                 LayerTrace* trace = nullptr);

/// All L layers over [T⁰ ; X⁰ ; K⁰]; returns every node's final feature.
Tensor adapter_graph_forward(const Tensor& input_nodes, const Tensor& output_nodes, const Tensor& knowledge_nodes,
                             const AdapterParams& params, const AdapterConfig& config, Rng& rng, bool training,
                             std::vector<LayerTrace>* traces = nullptr);

/// Final feature of the last partial-output node (1 × d). Requires L >= 1.
Tensor adapter_forward(const Tensor& input_nodes, const Tensor& output_nodes, const Tensor& knowledge_nodes,
                       const AdapterParams& params, const AdapterConfig& config, Rng& rng, bool training);

/// λ·(x_L·Wᵀ) + (1-λ)·(x_0·Wᵀ), row-wise; the softmax of this is ŷ.
Tensor blend_logits(const Tensor& adapter_features, const Tensor& original_features, const Tensor& output_head,
                    double residual);

/// ŷ for a single row.
std::vector<double> blend_probabilities(const Tensor& adapter_features, const Tensor& original_features,
                                        const Tensor& output_head, double residual);

}  // namespace malm
