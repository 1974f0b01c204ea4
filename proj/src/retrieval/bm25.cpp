// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "retrieval/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "common/error.hpp"
#include "common/le_bytes.hpp"
#include "text/normalize.hpp"

namespace malm {
namespace {

constexpr char magic[8] = {'M', 'A', 'L', 'M', 'B', 'M', '2', '5'};

double term_score(double idf, double tf, double len, double avg, const Bm25Params& p) {
    const double norm = avg > 0.0 ? len / avg : 0.0;
    return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

void put_string(std::ostream& out, const std::string& s) {
    put_le<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
public:
    Reader(std::vector<unsigned char> bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v = get_le<T>(bytes_.data() + pos_);
        pos_ += sizeof(T);
        return v;
    }

    std::string string() {
        const auto n = get<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) {
            fail(ErrorKind::parse, source_ + ": index file truncated at byte " + std::to_string(pos_));
        }
    }

    std::vector<unsigned char> bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open corpus " + path.string());
    }
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::parse, where + ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
            fail(ErrorKind::schema, where + ": expected an object with a string 'text'");
        }
        Document d;
        if (auto it = obj.find("id"); it != obj.end()) {
            d.id = it->is_string() ? it->get<std::string>() : it->dump();
        } else {
            d.id = std::to_string(docs.size());
        }
        d.title = obj.value("title", std::string{});
        d.text = obj["text"].get<std::string>();
        docs.push_back(std::move(d));
    }
    return docs;
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write corpus " + path.string());
    }
    for (const Document& d : docs) {
        out << nlohmann::json{{"id", d.id}, {"title", d.title}, {"text", d.text}}.dump() << '\n';
    }
}

std::vector<Passage> chunk_corpus(std::span<const Document> docs, std::size_t window, std::size_t* skipped) {
    if (window == 0) {
        fail(ErrorKind::invalid_argument, "chunk_corpus: window must be >= 1");
    }
    std::vector<Passage> out;
    std::size_t empty = 0;
    for (const Document& d : docs) {
        const std::vector<std::string> words = text::split_words(d.text);
        if (words.empty()) {
            ++empty;
            continue;
        }
        for (std::size_t begin = 0; begin < words.size(); begin += window) {
            const std::size_t end = std::min(words.size(), begin + window);
            Passage p;
            p.id = static_cast<std::uint32_t>(out.size());
            p.doc_id = d.id;
            p.word_begin = begin;
            p.word_end = end;
            p.text = text::join(std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(begin),
                                                         words.begin() + static_cast<std::ptrdiff_t>(end)));
            out.push_back(std::move(p));
        }
    }
    if (skipped != nullptr) {
        *skipped = empty;
    }
    return out;
}

std::vector<std::string> index_terms(std::string_view text) { return text::metric_tokens(text); }

InvertedIndex InvertedIndex::build(std::vector<Passage> passages, Bm25Params params) {
    if (passages.size() > UINT32_MAX) {
        fail(ErrorKind::invalid_argument, "index: too many passages");
    }
    InvertedIndex idx;
    idx.params_ = params;
    idx.lengths_.reserve(passages.size());
    double total = 0.0;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        passages[i].id = static_cast<std::uint32_t>(i);
        std::map<std::string, std::uint32_t> counts;
        const std::vector<std::string> terms = index_terms(passages[i].text);
        for (const std::string& t : terms) {
            ++counts[t];
        }
        for (const auto& [term, tf] : counts) {
            idx.postings_[term].push_back({static_cast<std::uint32_t>(i), tf});
        }
        idx.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        total += static_cast<double>(terms.size());
    }
    idx.avg_length_ = passages.empty() ? 0.0 : total / static_cast<double>(passages.size());
    idx.passages_ = std::move(passages);
    return idx;
}

std::span<const Posting> InvertedIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) {
        return {};
    }
    return it->second;
}

std::uint32_t InvertedIndex::term_frequency(const std::string& term, std::uint32_t passage) const {
    std::span<const Posting> list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), passage,
                               [](const Posting& p, std::uint32_t id) { return p.passage < id; });
    return it != list.end() && it->passage == passage ? it->tf : 0;
}

double InvertedIndex::idf(const std::string& term) const {
    const double n_docs = static_cast<double>(passages_.size());
    const double n_t = static_cast<double>(postings(term).size());
    return std::log(1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5));
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorKind::io, "cannot write index " + path.string());
    }
    out.write(magic, sizeof(magic));
    put_le<std::uint32_t>(out, bm25_index_version);
    put_le<double>(out, params_.k1);
    put_le<double>(out, params_.b);
    put_le<std::uint64_t>(out, passages_.size());
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        const Passage& p = passages_[i];
        put_string(out, p.doc_id);
        put_le<std::uint64_t>(out, p.word_begin);
        put_le<std::uint64_t>(out, p.word_end);
        put_string(out, p.text);
        put_le<std::uint32_t>(out, lengths_[i]);
    }
    put_le<std::uint64_t>(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        put_string(out, term);
        put_le<std::uint64_t>(out, list.size());
        for (const Posting& p : list) {
            put_le<std::uint32_t>(out, p.passage);
            put_le<std::uint32_t>(out, p.tf);
        }
    }
    if (!out) {
        fail(ErrorKind::io, "short write to index " + path.string());
    }
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io, "cannot open index " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(magic) || !std::equal(std::begin(magic), std::end(magic), bytes.begin())) {
        fail(ErrorKind::parse, path.string() + ": not a BM25 index file");
    }
    Reader r(std::vector<unsigned char>(bytes.begin() + sizeof(magic), bytes.end()), path.string());
    const auto version = r.get<std::uint32_t>();
    if (version != bm25_index_version) {
        fail(ErrorKind::parse, path.string() + ": unsupported index version " + std::to_string(version));
    }
    InvertedIndex idx;
    idx.params_.k1 = r.get<double>();
    idx.params_.b = r.get<double>();
    const auto n = r.get<std::uint64_t>();
    double total = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Passage p;
        p.id = static_cast<std::uint32_t>(i);
        p.doc_id = r.string();
        p.word_begin = r.get<std::uint64_t>();
        p.word_end = r.get<std::uint64_t>();
        p.text = r.string();
        const auto len = r.get<std::uint32_t>();
        idx.passages_.push_back(std::move(p));
        idx.lengths_.push_back(len);
        total += len;
    }
    idx.avg_length_ = n == 0 ? 0.0 : total / static_cast<double>(n);
    const auto terms = r.get<std::uint64_t>();
    for (std::uint64_t t = 0; t < terms; ++t) {
        std::string term = r.string();
        const auto count = r.get<std::uint64_t>();
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint64_t j = 0; j < count; ++j) {
            Posting p;
            p.passage = r.get<std::uint32_t>();
            p.tf = r.get<std::uint32_t>();
            if (p.passage >= n || (!list.empty() && list.back().passage >= p.passage)) {
                fail(ErrorKind::parse, path.string() + ": postings for '" + term + "' out of order or range");
            }
            list.push_back(p);
        }
        idx.postings_.emplace(std::move(term), std::move(list));
    }
    if (!r.at_end()) {
        fail(ErrorKind::parse, path.string() + ": trailing bytes after index");
    }
    return idx;
}

bool InvertedIndex::operator==(const InvertedIndex& o) const {
    if (params_.k1 != o.params_.k1 || params_.b != o.params_.b || lengths_ != o.lengths_ ||
        postings_ != o.postings_ || passages_.size() != o.passages_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        const Passage& a = passages_[i];
        const Passage& b = o.passages_[i];
        if (a.doc_id != b.doc_id || a.word_begin != b.word_begin || a.word_end != b.word_end || a.text != b.text) {
            return false;
        }
    }
    return true;
}

double bm25_score(std::span<const std::string> query_terms, std::uint32_t passage, const InvertedIndex& index) {
    const double len = index.length(passage);
    double score = 0.0;
    for (const std::string& t : query_terms) {
        const std::uint32_t tf = index.term_frequency(t, passage);
        if (tf != 0) {
            score += term_score(index.idf(t), tf, len, index.average_length(), index.params());
        }
    }
    return score;
}

std::vector<Hit> retrieve_topk(std::string_view query, const InvertedIndex& index, std::size_t k) {
    if (index.passage_count() == 0) {
        fail(ErrorKind::retrieval, "retrieve: index is empty");
    }
    if (k == 0) {
        fail(ErrorKind::invalid_argument, "retrieve: k must be >= 1");
    }
    std::vector<double> scores(index.passage_count(), 0.0);
    for (const std::string& t : index_terms(query)) {
        std::span<const Posting> list = index.postings(t);
        if (list.empty()) {
            continue;
        }
        const double idf = index.idf(t);
        for (const Posting& p : list) {
            scores[p.passage] +=
                term_score(idf, p.tf, index.length(p.passage), index.average_length(), index.params());
        }
    }
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0U);
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    std::vector<Hit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        hits.push_back({order[i], scores[order[i]]});
    }
    return hits;
}

bool answer_in_text(std::string_view answer, std::string_view text) {
    const std::string a = text::normalize_answer(answer);
    if (a.empty()) {
        return false;
    }
    const std::string t = " " + text::normalize_answer(text) + " ";
    return t.find(" " + a + " ") != std::string::npos;
}

std::map<std::size_t, double> topk_accuracy(std::span<const QueryAnswer> queries, const InvertedIndex& index,
                                            std::span<const std::size_t> ks) {
    if (queries.empty() || ks.empty()) {
        fail(ErrorKind::invalid_argument, "topk_accuracy: need at least one query and one k");
    }
    const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
    std::map<std::size_t, std::size_t> hits;
    for (std::size_t k : ks) {
        hits[k] = 0;
    }
    for (const QueryAnswer& q : queries) {
        const std::vector<Hit> top = retrieve_topk(q.question, index, k_max);
        // Rank of the first passage containing the answer; a hit for every k past it.
        std::size_t first = top.size();
        for (std::size_t r = 0; r < top.size(); ++r) {
            if (answer_in_text(q.answer, index.passage(top[r].passage).text)) {
                first = r;
                break;
            }
        }
        for (auto& [k, count] : hits) {
            if (first < k) {
                ++count;
            }
        }
    }
    std::map<std::size_t, double> out;
    for (const auto& [k, count] : hits) {
        out[k] = 100.0 * static_cast<double>(count) / static_cast<double>(queries.size());
    }
    return out;
}

}  // namespace malm
