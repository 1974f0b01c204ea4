// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "text/normalize.hpp"

#include <cctype>

namespace malm::text {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            out.emplace_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (const std::string& word : split_words(text)) {
        std::size_t lo = 0;
        std::size_t hi = word.size();
        while (lo < hi && is_punct(word[lo])) {
            out.emplace_back(1, word[lo]);
            ++lo;
        }
        std::size_t core_end = hi;
        while (core_end > lo && is_punct(word[core_end - 1])) {
            --core_end;
        }
        if (core_end > lo) {
            std::string core;
            core.reserve(core_end - lo);
            for (std::size_t k = lo; k < core_end; ++k) {
                core.push_back(lower(word[k]));
            }
            out.push_back(std::move(core));
        }
        for (std::size_t k = core_end; k < hi; ++k) {
            out.emplace_back(1, word[k]);
        }
    }
    return out;
}

std::vector<std::string> metric_tokens(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        if (!is_punct(c)) {
            cleaned.push_back(lower(c));
        }
    }
    return split_words(cleaned);
}

std::string normalize_answer(std::string_view text) {
    std::vector<std::string> kept;
    for (std::string& w : metric_tokens(text)) {
        if (w != "a" && w != "an" && w != "the") {
            kept.push_back(std::move(w));
        }
    }
    return join(kept);
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) {
            out.append(sep);
        }
        out.append(words[i]);
    }
    return out;
}

}  // namespace malm::text
