// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Vertex layout and adjacency of the three-subgraph attention graph. Global
// vertex order is [input | partial output | knowledge].

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensor/tensor.hpp"

namespace malm {

struct GraphLayout {
    std::size_t inputs = 0;     // M
    std::size_t outputs = 0;    // C, partial-output nodes (BOS included)
    std::size_t knowledge = 0;  // S

    std::size_t total() const noexcept { return inputs + outputs + knowledge; }
    std::size_t output_begin() const noexcept { return inputs; }
    std::size_t knowledge_begin() const noexcept { return inputs + outputs; }
    std::size_t last_output() const noexcept { return inputs + outputs - 1; }

    /// M >= 1 and C >= 1; throws a structural error otherwise.
    void validate() const;
};

/// Edge-family switches used by the ablation study.
struct Ablation {
    bool no_input_edges = false;
    bool full_context_edges = false;
    bool no_context_edges = false;
    bool no_knowledge_edges = false;

    void validate() const;
    std::string label() const;
    nlohmann::json to_json() const;
    static Ablation from_json(const nlohmann::json& j);
    bool operator==(const Ablation&) const = default;
};

/// Square boolean relation; edge(p, q) means p feeds into q, so the
/// neighbourhood of q is { p | edge(p, q) }.
class Adjacency {
public:
    explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

    std::size_t size() const noexcept { return n_; }
    bool edge(std::size_t p, std::size_t q) const { return bits_[p * n_ + q] != 0; }
    void set(std::size_t p, std::size_t q, bool on) { bits_[p * n_ + q] = on ? 1 : 0; }

    std::vector<std::size_t> neighbors(std::size_t q) const;
    std::size_t edge_count() const;
    /// Edges with source in [src_begin, src_end) and target in [dst_begin, dst_end).
    std::size_t block_count(std::size_t src_begin, std::size_t src_end, std::size_t dst_begin,
                            std::size_t dst_end) const;
    /// Row q, column p holds edge(p, q): the mask for attention rows over sources.
    Mask attention_mask() const;

private:
    std::size_t n_;
    std::vector<std::uint8_t> bits_;
};

/// Input and knowledge subgraphs are fully connected (self-loops included);
/// input → output and knowledge → output are complete bipartite links; the
/// output subgraph is causal (p feeds q iff p is not after q). Nothing flows
/// from output nodes into input or knowledge nodes.
Adjacency build_adjacency(const GraphLayout& layout, const Ablation& ablation = {});

}  // namespace malm
