// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "adapter/graph.hpp"

#include "common/error.hpp"

namespace malm {

void GraphLayout::validate() const {
    if (inputs == 0) {
        fail(ErrorKind::structural, "graph layout: no input nodes");
    }
    if (outputs == 0) {
        fail(ErrorKind::structural, "graph layout: no partial-output nodes");
    }
}

void Ablation::validate() const {
    if (full_context_edges && no_context_edges) {
        fail(ErrorKind::config, "ablation: full_context_edges and no_context_edges are exclusive");
    }
}

std::string Ablation::label() const {
    std::string out;
    auto push = [&out](const char* s) {
        if (!out.empty()) {
            out += "+";
        }
        out += s;
    };
    if (no_context_edges) {
        push("w/o Context");
    }
    if (full_context_edges) {
        push("w/ Full Context");
    }
    if (no_input_edges) {
        push("w/o Input");
    }
    if (no_knowledge_edges) {
        push("w/o Knowledge");
    }
    return out.empty() ? "MALM" : out;
}

nlohmann::json Ablation::to_json() const {
    return {{"no_input_edges", no_input_edges},
            {"full_context_edges", full_context_edges},
            {"no_context_edges", no_context_edges},
            {"no_knowledge_edges", no_knowledge_edges}};
}

Ablation Ablation::from_json(const nlohmann::json& j) {
    Ablation a;
    a.no_input_edges = j.value("no_input_edges", false);
    a.full_context_edges = j.value("full_context_edges", false);
    a.no_context_edges = j.value("no_context_edges", false);
    a.no_knowledge_edges = j.value("no_knowledge_edges", false);
    a.validate();
    return a;
}

std::vector<std::size_t> Adjacency::neighbors(std::size_t q) const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < n_; ++p) {
        if (edge(p, q)) {
            out.push_back(p);
        }
    }
    return out;
}

std::size_t Adjacency::edge_count() const { return block_count(0, n_, 0, n_); }

std::size_t Adjacency::block_count(std::size_t src_begin, std::size_t src_end, std::size_t dst_begin,
                                   std::size_t dst_end) const {
    std::size_t n = 0;
    for (std::size_t p = src_begin; p < src_end; ++p) {
        for (std::size_t q = dst_begin; q < dst_end; ++q) {
            n += bits_[p * n_ + q];
        }
    }
    return n;
}

Mask Adjacency::attention_mask() const {
    Mask mask(n_ * n_);
    for (std::size_t q = 0; q < n_; ++q) {
        for (std::size_t p = 0; p < n_; ++p) {
            mask[q * n_ + p] = bits_[p * n_ + q];
        }
    }
    return mask;
}

Adjacency build_adjacency(const GraphLayout& layout, const Ablation& ablation) {
    ablation.validate();
    const std::size_t m = layout.inputs;
    const std::size_t o = layout.output_begin();
    const std::size_t k = layout.knowledge_begin();
    const std::size_t n = layout.total();
    Adjacency adj(n);

    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
            adj.set(p, q, true);
        }
    }
    for (std::size_t p = k; p < n; ++p) {
        for (std::size_t q = k; q < n; ++q) {
            adj.set(p, q, true);
        }
    }
    if (!ablation.no_input_edges) {
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = o; q < k; ++q) {
                adj.set(p, q, true);
            }
        }
    }
    if (!ablation.no_knowledge_edges) {
        for (std::size_t p = k; p < n; ++p) {
            for (std::size_t q = o; q < k; ++q) {
                adj.set(p, q, true);
            }
        }
    }
    for (std::size_t p = o; p < k; ++p) {
        for (std::size_t q = o; q < k; ++q) {
            bool on = p <= q;
            if (ablation.full_context_edges) {
                on = true;
            } else if (ablation.no_context_edges) {
                on = p == q;
            }
            adj.set(p, q, on);
        }
    }
    return adj;
}

}  // namespace malm
