// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "text/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "common/error.hpp"
#include "text/normalize.hpp"

namespace malm::text {

Vocabulary::Vocabulary() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) {
        add(t);
    }
}

void Vocabulary::add(std::string token) {
    const auto id = static_cast<TokenId>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t max_size) {
    std::map<std::string, std::size_t> counts;
    bool any_text = false;
    for (const std::string& line : corpus) {
        for (std::string& tok : tokenize(line)) {
            any_text = true;
            ++counts[std::move(tok)];
        }
    }
    if (!any_text) {
        fail(ErrorKind::parse, "build_vocab: empty corpus");
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    // map order is lexicographic, so a stable sort by count keeps ties sorted
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary vocab;
    for (auto& [tok, n] : ranked) {
        if (vocab.size() >= max_size) {
            break;
        }
        if (!vocab.contains(tok)) {
            vocab.add(tok);
        }
    }
    return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> content_tokens) {
    Vocabulary vocab;
    for (auto& tok : content_tokens) {
        if (tok.empty() || vocab.contains(tok)) {
            fail(ErrorKind::parse, "vocabulary: empty or duplicate token '" + tok + "'");
        }
        vocab.add(std::move(tok));
    }
    return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open vocabulary file " + path.string());
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write vocabulary file " + path.string());
    }
    for (std::size_t i = reserved; i < tokens_.size(); ++i) {
        out << tokens_[i] << '\n';
    }
}

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        fail(ErrorKind::invalid_argument,
             "decode: id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const std::string& tok : tokenize(text)) {
        ids.push_back(id(tok));
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += token(ids[i]);
    }
    return out;
}

}  // namespace malm::text
