// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "retrieval/bm25.hpp"
#include "text/dataset.hpp"

namespace malm {

/// Synthetic lookup task. An entity is a two-word name drawn from shared word
/// pools; the split is by whole name, so every word is seen in training but no
/// test entity is. Codes come from one shared pool.
struct ToyDataConfig {
    std::size_t train = 500;
    std::size_t test = 100;
    std::size_t first_words = 40;
    std::size_t second_words = 40;
    std::size_t codes = 100;
    /// Extra facts about other entities appended to each knowledge field.
    std::size_t distractors = 0;
    std::uint64_t seed = 13;

    void validate() const;
    nlohmann::json to_json() const;
    static ToyDataConfig from_json(const nlohmann::json& j);
};

struct ToyData {
    std::vector<text::Record> train;
    std::vector<text::Record> test;
    /// One document per entity, both splits, holding its fact.
    std::vector<Document> corpus;
};

ToyData make_toy_data(const ToyDataConfig& config);

/// Writes train.jsonl, test.jsonl and corpus.jsonl into `dir`.
void write_toy_data(const std::filesystem::path& dir, const ToyData& data);

}  // namespace malm
