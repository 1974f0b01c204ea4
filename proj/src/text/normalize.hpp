// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace malm::text {

/// Model tokenizer: lowercase, split on whitespace, peel leading and trailing
/// ASCII punctuation off each word as single-character tokens. Punctuation
/// inside a word ("13,250", "o'neil") stays in the word.
std::vector<std::string> tokenize(std::string_view text);

/// Lowercase, drop ASCII punctuation, split on whitespace. Used by ROUGE and BLEU.
std::vector<std::string> metric_tokens(std::string_view text);

/// Answer normaliser shared by Exact Match and retrieval answer matching:
/// lowercase, drop punctuation, drop the articles a/an/the, collapse
/// whitespace to single spaces.
std::string normalize_answer(std::string_view text);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

/// Whitespace split with no other normalisation.
std::vector<std::string> split_words(std::string_view text);

}  // namespace malm::text
