// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Okapi BM25 over fixed-size word chunks.
//
// Index file layout (all integers little-endian):
//
//   bytes 0..7  magic "MALMBM25"
//   u32         format version
//   f64 f64     k1, b
//   u64         passage count, then per passage:
//                 string doc id, u64 word begin, u64 word end, string text,
//                 u32 length in terms
//   u64         term count, then per term (sorted):
//                 string term, u64 posting count, then (u32 passage, u32 tf)*
//
// Strings are a u64 byte length followed by the bytes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malm {

inline constexpr std::uint32_t bm25_index_version = 1;
inline constexpr std::size_t default_chunk_words = 100;

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

struct Passage {
    std::uint32_t id = 0;
    std::string doc_id;
    std::size_t word_begin = 0;
    std::size_t word_end = 0;
    std::string text;
};

struct Posting {
    std::uint32_t passage = 0;
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// JSON Lines with `id`, `title` and `text`; `title` may be absent.
std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const Document> docs);

/// Greedy non-overlapping windows of `window` whitespace words; the last window
/// may be short. Empty documents yield nothing and are counted in `skipped`.
std::vector<Passage> chunk_corpus(std::span<const Document> docs, std::size_t window = default_chunk_words,
                                  std::size_t* skipped = nullptr);

/// Terms used for both indexing and querying.
std::vector<std::string> index_terms(std::string_view text);

class InvertedIndex {
public:
    InvertedIndex() = default;
    static InvertedIndex build(std::vector<Passage> passages, Bm25Params params = {});

    std::size_t passage_count() const noexcept { return passages_.size(); }
    double average_length() const noexcept { return avg_length_; }
    const Bm25Params& params() const noexcept { return params_; }
    const std::vector<Passage>& passages() const noexcept { return passages_; }
    const Passage& passage(std::uint32_t id) const { return passages_.at(id); }
    std::uint32_t length(std::uint32_t id) const { return lengths_.at(id); }
    std::size_t term_count() const noexcept { return postings_.size(); }
    /// Empty when the term is absent.
    std::span<const Posting> postings(const std::string& term) const;
    std::uint32_t term_frequency(const std::string& term, std::uint32_t passage) const;
    double idf(const std::string& term) const;

    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

    bool operator==(const InvertedIndex& other) const;

private:
    Bm25Params params_;
    std::vector<Passage> passages_;
    std::vector<std::uint32_t> lengths_;
    double avg_length_ = 0.0;
    std::map<std::string, std::vector<Posting>> postings_;
};

/// BM25 score of one passage; each query term counts once per occurrence.
double bm25_score(std::span<const std::string> query_terms, std::uint32_t passage, const InvertedIndex& index);

struct Hit {
    std::uint32_t passage = 0;
    double score = 0.0;
};

/// Best `k` passages by score, ties to the lower id. Zero-score passages fill
/// the tail when fewer passages match.
std::vector<Hit> retrieve_topk(std::string_view query, const InvertedIndex& index, std::size_t k);

/// True when the normalised answer appears in the normalised passage text on
/// word boundaries.
bool answer_in_text(std::string_view answer, std::string_view text);

struct QueryAnswer {
    std::string question;
    std::string answer;
};

/// Percentage of questions whose answer appears in one of the top-k passages,
/// for each k in `ks`. One retrieval per question at max(ks).
std::map<std::size_t, double> topk_accuracy(std::span<const QueryAnswer> queries, const InvertedIndex& index,
                                            std::span<const std::size_t> ks);

}  // namespace malm
