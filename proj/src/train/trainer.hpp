// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapter/model.hpp"
#include "text/dataset.hpp"
#include "train/adamw.hpp"

namespace malm {

struct TrainConfig {
    AdamWConfig optimizer{5e-4, 0.9, 0.999, 1e-8, 0.01};
    std::size_t epochs = 2;
    std::size_t batch_size = 1;
    std::size_t accumulation = 64;
    std::uint64_t seed = 0;
    bool train_adapter = true;
    bool train_lora = false;
    std::size_t knowledge_max_tokens = 128;
    std::size_t max_nan_streak = 10;
    /// Per-epoch checkpoints are written here when non-empty.
    std::filesystem::path checkpoint_dir;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double loss = 0.0;  // mean per-sample loss over the accumulation window
    double wall_seconds = 0.0;
    bool skipped = false;
    std::map<std::string, double> group_norms;

    nlohmann::json to_json() const;
};

struct TrainSummary {
    std::vector<TrainRecord> records;
    std::size_t optimizer_steps = 0;
    std::size_t skipped_steps = 0;
    std::vector<std::filesystem::path> checkpoints;
};

/// Summed cross-entropy over answer positions (plus the closing EOS) with the
/// gold prefix fed as partial output. `cached`, when given, replaces the
/// foundation passes.
Tensor teacher_forced_loss(const MalmModel& model, const text::Sample& sample, Rng& rng, bool training,
                           const StreamFeatures* cached = nullptr);

/// Targets for the partial-output nodes of a sample: answer tokens then EOS.
std::vector<TokenId> answer_targets(const text::Sample& sample);

/// Knowledge cut to the configured budget.
std::span<const TokenId> clipped_knowledge(const text::Sample& sample, std::size_t max_tokens);

/// Loss summed over several samples in one graph (reference for gradient
/// accumulation).
Tensor batch_loss(const MalmModel& model, std::span<const text::Sample> samples, Rng& rng, bool training,
                  std::size_t knowledge_max_tokens);

TrainSummary train_adapter(MalmModel& model, std::span<const text::Sample> dataset, const TrainConfig& config,
                           const std::function<void(const TrainRecord&)>& on_record = {});

}  // namespace malm
