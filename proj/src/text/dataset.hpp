// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "common/rng.hpp"
#include "text/vocab.hpp"

namespace malm::text {

/// Raw QA record in the HaluEval schema.
struct Record {
    std::string id;
    std::size_t line = 0;
    std::string question;
    std::string knowledge;
    std::string right_answer;
};

/// One encoded QA item E = {T, K, Y} with its raw text kept for metrics.
struct Sample {
    std::string id;
    std::size_t line = 0;
    std::string question_text;
    std::string knowledge_text;
    std::string answer_text;
    std::vector<TokenId> question;
    std::vector<TokenId> knowledge;
    std::vector<TokenId> answer;
};

/// Reads JSON Lines with string fields `question`, `knowledge`, `right_answer`
/// and an optional `id` (defaults to the zero-based record index). Blank lines
/// are skipped.
std::vector<Record> read_records(std::istream& in, const std::string& source);
std::vector<Record> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<Record>& records);

/// Encodes records; empty question or answer after tokenisation is a schema error.
std::vector<Sample> encode_records(const std::vector<Record>& records, const Vocabulary& vocab);
Sample encode_record(const Record& record, const Vocabulary& vocab);

std::vector<Sample> load_dataset(const std::filesystem::path& path, const Vocabulary& vocab);

/// Random split keeping each side in input order. Train gets
/// round(n * train_fraction) items, clamped to [1, n-1].
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& items, double train_fraction, Rng& rng);

}  // namespace malm::text

#include "text/dataset_split.ipp"
