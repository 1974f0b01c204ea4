// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment drivers. Every run shares one vocabulary and one foundation
// checkpoint across its rows; each row is trained and evaluated once per seed
// and written to <output_dir>/<row slug>/seed-<s>/.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness/config.hpp"
#include "metrics/metrics.hpp"
#include "retrieval/bm25.hpp"
#include "text/dataset.hpp"
#include "text/vocab.hpp"

namespace malm {

inline constexpr int manifest_format_version = 1;

/// One system in a results table.
struct ArmSpec {
    std::string label;
    std::string slug;
    std::size_t layers = 2;
    Ablation ablation;
    bool lora = false;
    bool train_lora = false;

    nlohmann::json to_json() const;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint;
    std::filesystem::path generations;
    std::filesystem::path train_log;
    std::size_t optimizer_steps = 0;
    double final_loss = 0.0;
    MetricReport report;
};

struct RunRow {
    ArmSpec arm;
    std::vector<SeedRun> seeds;
    MetricReport aggregate;  // mean over seeds
};

struct RunManifest {
    int format_version = manifest_format_version;
    std::string kind;
    std::string name;
    std::string config_hash;
    nlohmann::json config;
    std::string foundation_digest;
    std::vector<RunRow> rows;
    nlohmann::json extras = nlohmann::json::object();

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);

    const RunRow& row(const std::string& slug) const;
    std::string table() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Vocabulary, encoded splits and the frozen foundation shared by all rows.
struct PreparedData {
    text::Vocabulary vocab;
    std::vector<text::Sample> train;
    std::vector<text::Sample> test;
    Foundation foundation;
    std::filesystem::path foundation_path;
    std::string foundation_digest;
};

/// Loads or builds the vocabulary and loads the foundation checkpoint, or
/// pretrains one into the output directory when none is configured.
PreparedData prepare_data(const ExperimentConfig& config, const ProgressFn& progress = {});

/// Corpus for foundation pretraining: every training QA pair as
/// (question, BOS, answer, EOS) and every knowledge field as its own sequence.
std::vector<std::vector<TokenId>> pretraining_corpus(std::span<const text::Sample> train, std::size_t max_len);

ArmSpec baseline_arm(const ExperimentConfig& config);
ArmSpec adapter_arm(const ExperimentConfig& config);
std::vector<ArmSpec> ablation_arms(const ExperimentConfig& config);
std::vector<ArmSpec> layer_sweep_arms(const ExperimentConfig& config, std::span<const std::size_t> layers);

struct TrainedArm {
    MalmModel model;
    std::size_t optimizer_steps = 0;
    double final_loss = 0.0;
};

/// Initialises and trains one arm; writes train_log.jsonl and model.ckpt to `dir`.
TrainedArm train_arm(const ExperimentConfig& config, const PreparedData& data, const ArmSpec& arm,
                     std::uint64_t seed, const std::filesystem::path& dir);

/// Decodes every sample with the configured settings (sampling seeded from
/// `seed` and the sample position).
std::vector<GeneratedText> generate_outputs(const MalmModel& model, const text::Vocabulary& vocab,
                                            std::span<const text::Sample> samples, const DecodingConfig& decoding,
                                            std::size_t knowledge_max_tokens, std::uint64_t seed);

/// Looks an arm up by slug among the compare, ablation and "layers-<L>" rows.
ArmSpec arm_by_slug(const ExperimentConfig& config, const std::string& slug);

/// Trains and evaluates one arm for one seed, writing its artifacts to `dir`.
SeedRun run_arm(const ExperimentConfig& config, const PreparedData& data, const ArmSpec& arm, std::uint64_t seed,
                const std::filesystem::path& dir, const ProgressFn& progress = {});

RunManifest run_rows(const std::string& kind, const ExperimentConfig& config, const PreparedData& data,
                     std::span<const ArmSpec> arms, const ProgressFn& progress = {});

RunManifest run_compare(const ExperimentConfig& config, const ProgressFn& progress = {});
RunManifest run_ablation(const ExperimentConfig& config, const ProgressFn& progress = {});
RunManifest run_layer_sweep(const ExperimentConfig& config, std::span<const std::size_t> layers,
                            const ProgressFn& progress = {});
/// Knowledge from BM25 when the config asks for it (dataset knowledge
/// otherwise), then the run_compare rows plus a top-k accuracy table.
RunManifest run_rag(const ExperimentConfig& config, const ProgressFn& progress = {});

/// Replaces each sample's knowledge with its concatenated positive-score top-k
/// passages. Returns the number of samples left with no knowledge.
std::size_t attach_retrieved_knowledge(std::vector<text::Sample>& samples, const InvertedIndex& index,
                                       std::size_t k, const text::Vocabulary& vocab);

}  // namespace malm
