// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "adapter/gat.hpp"

#include <cmath>

#include "common/error.hpp"

namespace malm {
namespace {

Tensor activate(const Tensor& x, Activation a) {
    switch (a) {
        case Activation::elu: return elu(x);
        case Activation::relu: return relu(x);
        case Activation::tanh: return tanh(x);
        case Activation::identity: return x;
    }
    return x;
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::numeric, what + " produced a non-finite value");
        }
    }
}

std::string head_name(std::size_t l, std::size_t h, const char* leaf) {
    return "layers." + std::to_string(l) + ".heads." + std::to_string(h) + "." + leaf;
}

std::string layer_name(std::size_t l, const char* leaf) { return "layers." + std::to_string(l) + "." + leaf; }

}  // namespace

const char* activation_name(Activation a) noexcept {
    switch (a) {
        case Activation::elu: return "elu";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "elu";
}

Activation parse_activation(const std::string& name) {
    if (name == "elu") return Activation::elu;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    fail(ErrorKind::config, "unknown activation '" + name + "'");
}

void AdapterConfig::validate() const {
    if (!(residual >= 0.0 && residual <= 1.0)) {
        fail(ErrorKind::config, "adapter: residual weight must lie in [0, 1]");
    }
    if (layers > 0 && heads == 0) {
        fail(ErrorKind::config, "adapter: heads must be >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        fail(ErrorKind::config, "adapter: dropout must lie in [0, 1)");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        fail(ErrorKind::config, "adapter: leaky slope must lie in (0, 1)");
    }
    ablation.validate();
}

nlohmann::json AdapterConfig::to_json() const {
    return {{"layers", layers},           {"heads", heads},
            {"residual", residual},       {"dropout", dropout},
            {"leaky_slope", leaky_slope}, {"activation", activation_name(activation)},
            {"ablation", ablation.to_json()}};
}

AdapterConfig AdapterConfig::from_json(const nlohmann::json& j) {
    AdapterConfig c;
    try {
        c.layers = j.at("layers").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.residual = j.at("residual").get<double>();
        c.dropout = j.value("dropout", 0.1);
        c.leaky_slope = j.value("leaky_slope", 0.2);
        c.activation = parse_activation(j.value("activation", std::string("elu")));
        if (j.contains("ablation")) {
            c.ablation = Ablation::from_json(j.at("ablation"));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema, std::string("adapter config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

AdapterParams AdapterParams::init(std::size_t width, const AdapterConfig& config, Rng& rng) {
    config.validate();
    AdapterParams p;
    p.width = width;
    if (config.layers == 0) {
        return p;
    }
    if (width % config.heads != 0) {
        fail(ErrorKind::config, "adapter: width " + std::to_string(width) + " not divisible by heads " +
                                    std::to_string(config.heads));
    }
    const std::size_t dh = width / config.heads;
    const auto glorot = [](std::size_t fan_in, std::size_t fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    };
    for (std::size_t l = 0; l < config.layers; ++l) {
        GatLayer layer;
        for (std::size_t h = 0; h < config.heads; ++h) {
            GatHead head;
            head.proj = Tensor::uniform(width, dh, glorot(width, dh), rng, true);
            head.attn = Tensor::uniform(2 * dh, 1, glorot(2 * dh, 1), rng, true);
            layer.heads.push_back(std::move(head));
        }
        layer.out = Tensor::uniform(config.heads * dh, width, glorot(config.heads * dh, width), rng, true);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

std::vector<Tensor> AdapterParams::trainables() const {
    std::vector<Tensor> out;
    for (const GatLayer& layer : layers) {
        for (const GatHead& head : layer.heads) {
            out.push_back(head.proj);
            out.push_back(head.attn);
        }
        out.push_back(layer.out);
    }
    return out;
}

std::size_t AdapterParams::scalar_count() const {
    std::size_t n = 0;
    for (const Tensor& t : trainables()) {
        n += t.size();
    }
    return n;
}

AdapterParams AdapterParams::clone() const {
    AdapterParams p;
    p.width = width;
    for (const GatLayer& layer : layers) {
        GatLayer copy;
        for (const GatHead& head : layer.heads) {
            copy.heads.push_back({head.proj.clone(head.proj.requires_grad()), head.attn.clone(head.attn.requires_grad())});
        }
        copy.out = layer.out.clone(layer.out.requires_grad());
        p.layers.push_back(std::move(copy));
    }
    return p;
}

CheckpointSection AdapterParams::to_section(const AdapterConfig& config) const {
    CheckpointSection s;
    s.config = config.to_json();
    s.config["width"] = width;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t h = 0; h < layers[l].heads.size(); ++h) {
            s.arrays.push_back(to_array(head_name(l, h, "proj"), layers[l].heads[h].proj));
            s.arrays.push_back(to_array(head_name(l, h, "attn"), layers[l].heads[h].attn));
        }
        s.arrays.push_back(to_array(layer_name(l, "out"), layers[l].out));
    }
    return s;
}

AdapterParams AdapterParams::from_section(const CheckpointSection& section, const AdapterConfig& config) {
    AdapterParams p;
    p.width = section.config.value("width", std::size_t{0});
    if (config.layers == 0) {
        return p;
    }
    if (p.width == 0 || p.width % config.heads != 0) {
        fail(ErrorKind::schema, "adapter section: width incompatible with head count");
    }
    const std::size_t dh = p.width / config.heads;
    for (std::size_t l = 0; l < config.layers; ++l) {
        GatLayer layer;
        for (std::size_t h = 0; h < config.heads; ++h) {
            layer.heads.push_back({from_array(section.array(head_name(l, h, "proj")), p.width, dh, true),
                                   from_array(section.array(head_name(l, h, "attn")), 2 * dh, 1, true)});
        }
        layer.out = from_array(section.array(layer_name(l, "out")), config.heads * dh, p.width, true);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

// ---------------------------------------------------------------------------

std::vector<double> attention_scores(std::size_t q, std::span<const std::size_t> neighbors, const Tensor& features,
                                     const GatHead& head, double leaky_slope) {
    if (neighbors.empty()) {
        fail(ErrorKind::structural, "attention: node " + std::to_string(q) + " has an empty neighbourhood");
    }
    const std::size_t d = features.cols();
    const std::size_t dh = head.proj.cols();
    auto project = [&](std::size_t node) {
        std::vector<double> out(dh, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double x = features(node, i);
            for (std::size_t j = 0; j < dh; ++j) {
                out[j] += x * head.proj(i, j);
            }
        }
        return out;
    };
    const std::vector<double> wq = project(q);
    double target_term = 0.0;
    for (std::size_t j = 0; j < dh; ++j) {
        target_term += head.attn(dh + j, 0) * wq[j];
    }
    std::vector<double> logits;
    logits.reserve(neighbors.size());
    for (std::size_t p : neighbors) {
        const std::vector<double> wp = project(p);
        double source_term = 0.0;
        for (std::size_t j = 0; j < dh; ++j) {
            source_term += head.attn(j, 0) * wp[j];
        }
        logits.push_back(leaky_relu(source_term + target_term, leaky_slope));
    }
    return softmax_masked(logits, {});
}

Tensor gat_layer(const Tensor& features, const Adjacency& adjacency, const GatLayer& layer,
                 const AdapterConfig& config, Rng& rng, bool training, std::size_t layer_index, LayerTrace* trace) {
    if (features.rows() != adjacency.size()) {
        fail(ErrorKind::dimension, "gat_layer: " + std::to_string(features.rows()) + " feature rows for a graph of " +
                                       std::to_string(adjacency.size()) + " nodes");
    }
    const Mask mask = adjacency.attention_mask();
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(layer.heads.size());
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
        const GatHead& head = layer.heads[h];
        const std::size_t dh = head.proj.cols();
        Tensor projected = matmul(features, head.proj);
        Tensor source_score = matmul(projected, slice_rows(head.attn, 0, dh));
        Tensor target_score = matmul(projected, slice_rows(head.attn, dh, dh));
        // row q, column p: LeakyReLU(a_srcᵀ W p + a_dstᵀ W q)
        Tensor logits = leaky_relu(add_outer(target_score, source_score), config.leaky_slope);
        Tensor alpha = softmax_rows(logits, mask);
        if (trace != nullptr) {
            trace->attention.push_back(alpha.to_vector());
        }
        alpha = dropout(alpha, config.dropout, rng, training);
        Tensor head_out = activate(matmul(alpha, projected), config.activation);
        check_finite(head_out, "gat layer " + std::to_string(layer_index) + " head " + std::to_string(h));
        head_outputs.push_back(std::move(head_out));
    }
    Tensor out = matmul(concat_cols(head_outputs), layer.out);
    return dropout(out, config.dropout, rng, training);
}

Tensor adapter_graph_forward(const Tensor& input_nodes, const Tensor& output_nodes, const Tensor& knowledge_nodes,
                             const AdapterParams& params, const AdapterConfig& config, Rng& rng, bool training,
                             std::vector<LayerTrace>* traces) {
    GraphLayout layout{input_nodes.rows(), output_nodes.rows(), knowledge_nodes.defined() ? knowledge_nodes.rows() : 0};
    layout.validate();
    if (params.layers.size() != config.layers) {
        fail(ErrorKind::config, "adapter: parameters hold " + std::to_string(params.layers.size()) +
                                    " layers, config asks for " + std::to_string(config.layers));
    }
    std::vector<Tensor> parts{input_nodes, output_nodes};
    if (layout.knowledge > 0) {
        parts.push_back(knowledge_nodes);
    }
    Tensor x = concat_rows(parts);
    const Adjacency adjacency = build_adjacency(layout, config.ablation);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        LayerTrace* trace = nullptr;
        if (traces != nullptr) {
            traces->emplace_back();
            trace = &traces->back();
        }
        x = gat_layer(x, adjacency, params.layers[l], config, rng, training, l, trace);
    }
    return x;
}

Tensor adapter_forward(const Tensor& input_nodes, const Tensor& output_nodes, const Tensor& knowledge_nodes,
                       const AdapterParams& params, const AdapterConfig& config, Rng& rng, bool training) {
    if (config.layers == 0) {
        fail(ErrorKind::config, "adapter_forward: L = 0 bypasses the adapter");
    }
    Tensor all = adapter_graph_forward(input_nodes, output_nodes, knowledge_nodes, params, config, rng, training);
    return slice_rows(all, input_nodes.rows() + output_nodes.rows() - 1, 1);
}

Tensor blend_logits(const Tensor& adapter_features, const Tensor& original_features, const Tensor& output_head,
                    double residual) {
    if (!(residual >= 0.0 && residual <= 1.0)) {
        fail(ErrorKind::invalid_argument, "blend: residual weight must lie in [0, 1]");
    }
    Tensor graph_logits = matmul_nt(adapter_features, output_head);
    Tensor original_logits = matmul_nt(original_features, output_head);
    return add(scale(graph_logits, residual), scale(original_logits, 1.0 - residual));
}

std::vector<double> blend_probabilities(const Tensor& adapter_features, const Tensor& original_features,
                                        const Tensor& output_head, double residual) {
    Tensor logits = blend_logits(adapter_features, original_features, output_head, residual);
    if (logits.rows() != 1) {
        fail(ErrorKind::dimension, "blend_probabilities expects a single row");
    }
    return softmax_masked(logits.values(), {});
}

}  // namespace malm
