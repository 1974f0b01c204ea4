// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "adapter/gat.hpp"
#include "lm/foundation.hpp"

namespace malm {

/// Foundation (optionally with low-rank deltas) plus the graph adapter.
struct MalmModel {
    Foundation foundation;
    std::optional<LoraSet> lora;
    AdapterConfig adapter_config;
    AdapterParams adapter;
    /// Whether the knowledge stream also sees the low-rank deltas.
    bool knowledge_uses_lora = true;

    const LoraSet* question_lora() const { return lora ? &*lora : nullptr; }
    const LoraSet* knowledge_lora() const { return lora && knowledge_uses_lora ? &*lora : nullptr; }

    MalmModel clone() const;

    void save(const std::filesystem::path& path) const;
    static MalmModel load(const std::filesystem::path& path);
    /// Foundation (+ lora) from `foundation_path`; the adapter section, when
    /// present, from `adapter_path`.
    static MalmModel load(const std::filesystem::path& foundation_path, const std::filesystem::path& adapter_path);
};

/// Hidden states of both foundation streams for one sample.
struct StreamFeatures {
    std::size_t question_len = 0;  // M
    Tensor question_hidden;        // rows: T, BOS, answer prefix
    Tensor question_logits;
    Tensor knowledge_hidden;       // S × d
};

/// Runs T ++ [BOS] ++ prefix through the question stream and K through the
/// knowledge stream.
StreamFeatures encode_streams(const MalmModel& model, std::span<const TokenId> question,
                              std::span<const TokenId> prefix, std::span<const TokenId> knowledge);

/// Blended logits for every partial-output node of the features: row j is the
/// prediction after BOS + j answer tokens. With L = 0 these are the foundation
/// logits.
Tensor output_logits(const MalmModel& model, const StreamFeatures& features, Rng& rng, bool training);

enum class DecodingMode { greedy, top_k };

struct DecodingConfig {
    DecodingMode mode = DecodingMode::greedy;
    std::size_t top_k = 5;
    std::uint64_t seed = 0;
    std::size_t max_len = 16;
};

struct Generation {
    std::vector<TokenId> tokens;  // EOS excluded
    bool truncated = false;       // max_len reached without EOS
};

/// Autoregressive decoding with the graph rebuilt at every step from
/// (M, 1 + |X|, S) nodes.
Generation generate(const MalmModel& model, std::span<const TokenId> question, std::span<const TokenId> knowledge,
                    const DecodingConfig& decoding);

/// Reference decoder that uses only the foundation's own next-token logits.
Generation generate_foundation_only(const Foundation& foundation, const LoraSet* lora,
                                    std::span<const TokenId> question, const DecodingConfig& decoding);

}  // namespace malm
