// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/rng.hpp"
#include "lm/checkpoint.hpp"
#include "tensor/tensor.hpp"
#include "text/vocab.hpp"

namespace malm {

using text::TokenId;

struct FoundationConfig {
    std::size_t vocab_size = 0;
    std::size_t width = 64;
    std::size_t blocks = 2;
    std::size_t heads = 4;
    std::size_t ffn_width = 256;
    std::size_t max_seq_len = 512;
    std::string positional = "learned";

    void validate() const;
    nlohmann::json to_json() const;
    static FoundationConfig from_json(const nlohmann::json& j);
};

/// Insertion-ordered name → tensor map.
class ParameterSet {
public:
    void add(std::string name, Tensor tensor);
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::vector<Tensor> tensors() const;
    std::size_t scalar_count() const;
    void set_requires_grad(bool flag);
    void zero_grad();
    /// Deep copy with no shared storage.
    ParameterSet clone() const;

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> index_;
};

/// Trainable low-rank update of one frozen matrix: W_eff = W + scaling · A·B.
struct LowRankDelta {
    Tensor a;  // rows(W) × rank
    Tensor b;  // rank × cols(W)
};

struct LoraSet {
    std::size_t rank = 0;
    double scaling = 1.0;
    std::map<std::string, LowRankDelta> deltas;

    std::vector<Tensor> trainables() const;
    std::size_t scalar_count() const;
    LoraSet clone() const;
};

/// Output of one pass through the decoder: last-block hidden states (after the
/// final layer norm, n × d) and next-token logits (n × |V|).
struct StreamOutput {
    Tensor hidden;
    Tensor logits;
};

/// Pre-LN decoder-only transformer with learned positions and an output head
/// tied to the token embedding. The same weights serve the question stream and
/// the knowledge stream.
class Foundation {
public:
    Foundation() = default;
    Foundation(FoundationConfig config, Rng& rng);
    Foundation(FoundationConfig config, ParameterSet params);

    const FoundationConfig& config() const noexcept { return config_; }
    const ParameterSet& params() const noexcept { return params_; }
    ParameterSet& params() noexcept { return params_; }

    /// Output head W [|V| × d]; logits = hidden · Wᵀ.
    const Tensor& output_head() const { return params_.get("tok_emb"); }

    StreamOutput forward_stream(std::span<const TokenId> tokens, const LoraSet* lora = nullptr) const;
    Tensor encode_knowledge(std::span<const TokenId> tokens, const LoraSet* lora = nullptr) const;

    Foundation clone() const;

    CheckpointSection to_section() const;
    static Foundation from_section(const CheckpointSection& section);

    void save(const std::filesystem::path& path, const LoraSet* lora = nullptr) const;

private:
    Tensor linear(const Tensor& x, const std::string& name, const LoraSet* lora) const;
    Tensor hidden_states(std::span<const TokenId> tokens, const LoraSet* lora) const;

    FoundationConfig config_;
    ParameterSet params_;
};

/// Names of every matrix a low-rank delta may target.
std::vector<std::string> lora_target_names(const FoundationConfig& config);

/// Attaches deltas to `targets` (exact names, or a suffix such as "attn.wq"
/// that matches every block). A is small Gaussian (std 1/rows(W)) and B is zero,
/// so a fresh delta is null. The base weights are marked frozen.
LoraSet apply_lora(Foundation& foundation, std::span<const std::string> targets, std::size_t rank, double scaling,
                   Rng& rng);

CheckpointSection lora_to_section(const LoraSet& lora);
LoraSet lora_from_section(const CheckpointSection& section, const Foundation& foundation);

/// Question-stream sequence: T ++ [BOS] ++ answer.
std::vector<TokenId> question_stream(std::span<const TokenId> question, std::span<const TokenId> answer_prefix);

}  // namespace malm
