// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace malm::text {

using TokenId = std::int32_t;

/// Word-level vocabulary. Ids 0..3 are reserved (PAD, BOS, EOS, UNK); content
/// tokens follow, most frequent first.
class Vocabulary {
public:
    static constexpr TokenId pad = 0;
    static constexpr TokenId bos = 1;
    static constexpr TokenId eos = 2;
    static constexpr TokenId unk = 3;
    static constexpr std::size_t reserved = 4;

    Vocabulary();

    /// Counts tokens over every line; keeps at most `max_size` ids in total
    /// (reserved ones included). Ties in frequency are broken lexicographically.
    static Vocabulary build(std::span<const std::string> corpus, std::size_t max_size);
    static Vocabulary from_tokens(std::vector<std::string> content_tokens);

    /// One content token per line; line k holds id k + reserved.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const;
    bool contains(std::string_view token) const;

    std::vector<TokenId> encode(std::string_view text) const;
    /// Tokens joined by single spaces.
    std::string decode(std::span<const TokenId> ids) const;

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    void add(std::string token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace malm::text
