// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration, read from an INI file:
//
//   [run]        name, output_dir, seeds
//   [data]       train, test, vocab, vocab_max_size
//   [foundation] checkpoint or the architecture plus pretraining settings
//   [lora]       rank, scaling, targets, joint_with_adapter
//   [adapter]    layers, heads, residual, dropout, leaky_slope, activation
//   [train]      lr, beta1, beta2, eps, weight_decay, epochs, batch_size,
//                accumulation, knowledge_max_tokens
//   [decoding]   mode, top_k, max_len
//   [retrieval]  mode, index, k, accuracy_ks
//
// Keys left out take the defaults below; unknown keys are rejected.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapter/gat.hpp"
#include "adapter/model.hpp"
#include "lm/foundation.hpp"
#include "lm/pretrain.hpp"
#include "train/trainer.hpp"

namespace malm {

struct LoraConfig {
    std::size_t rank = 8;
    double scaling = 2.0;
    std::vector<std::string> targets{"attn.wq", "attn.wv"};
    /// Train the deltas together with the adapter in adapter arms.
    bool joint_with_adapter = false;
};

enum class KnowledgeSource { dataset, bm25 };

struct RetrievalConfig {
    KnowledgeSource mode = KnowledgeSource::dataset;
    std::filesystem::path index;
    std::size_t k = 5;
    std::vector<std::size_t> accuracy_ks{1, 5, 20, 50, 100};
};

struct ExperimentConfig {
    std::string name = "malm";
    std::filesystem::path output_dir = "runs";
    std::vector<std::uint64_t> seeds{7};

    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::filesystem::path vocab_path;  // built from the training split when empty
    std::size_t vocab_max_size = 32000;

    std::filesystem::path foundation_checkpoint;  // pretrained in-run when empty
    FoundationConfig foundation;
    PretrainConfig pretrain;

    LoraConfig lora;
    AdapterConfig adapter;
    TrainConfig train;
    DecodingConfig decoding;
    RetrievalConfig retrieval;

    /// Paths resolve against the config file's directory; `output_dir`
    /// resolves against $MALM_OUTPUT_ROOT when that is set.
    static ExperimentConfig load(const std::filesystem::path& path);
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    static ExperimentConfig from_json_unchecked(const nlohmann::json& j);

public:
    /// Seeds nonempty, referenced inputs exist, component configs valid.
    void validate() const;
    /// Digest of the canonical JSON form.
    std::string hash() const;
};

/// `MALM_OUTPUT_ROOT` joined with a relative `dir`; absolute dirs pass through.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

}  // namespace malm
