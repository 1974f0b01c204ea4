// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "common/error.hpp"
#include "support.hpp"
#include "text/dataset.hpp"
#include "text/normalize.hpp"
#include "text/vocab.hpp"

namespace malm::text {
namespace {

using Words = std::vector<std::string>;

TEST(Tokenize, PeelsEdgePunctuation) {
    EXPECT_EQ(tokenize("What is the code of Bako Timu?"),
              (Words{"what", "is", "the", "code", "of", "bako", "timu", "?"}));
    EXPECT_EQ(tokenize("(\"Hi!\")"), (Words{"(", "\"", "hi", "!", "\"", ")"}));
    EXPECT_EQ(tokenize("paid 13,250 to O'Neil."), (Words{"paid", "13,250", "to", "o'neil", "."}));
    EXPECT_TRUE(tokenize("  \t ").empty());
}

TEST(Normalize, AnswerRules) {
    EXPECT_EQ(normalize_answer("The Wheel of Time."), "wheel of time");
    EXPECT_EQ(normalize_answer("  an   Apple, a day "), "apple day");
    EXPECT_EQ(normalize_answer("13,250"), "13250");
    EXPECT_EQ(normalize_answer("theater"), "theater");
}

TEST(Normalize, MetricTokensKeepArticles) {
    EXPECT_EQ(metric_tokens("The cat, sat."), (Words{"the", "cat", "sat"}));
}

TEST(Vocabulary, FrequencyThenLexicographicOrder) {
    std::vector<std::string> corpus{"b a c", "a b", "a d"};
    Vocabulary v = Vocabulary::build(corpus, 100);
    ASSERT_EQ(v.size(), Vocabulary::reserved + 4);
    EXPECT_EQ(v.token(4), "a");  // 3 occurrences
    EXPECT_EQ(v.token(5), "b");  // 2
    EXPECT_EQ(v.token(6), "c");  // 1, before d
    EXPECT_EQ(v.token(7), "d");
    Vocabulary capped = Vocabulary::build(corpus, Vocabulary::reserved + 2);
    EXPECT_EQ(capped.size(), Vocabulary::reserved + 2);
    EXPECT_EQ(capped.id("c"), Vocabulary::unk);
}

TEST(Vocabulary, ReservedIdsAndRoundTrip) {
    Vocabulary v = Vocabulary::from_tokens({"hello", "world"});
    EXPECT_EQ(v.id("<pad>"), Vocabulary::pad);
    EXPECT_EQ(v.id("<bos>"), Vocabulary::bos);
    EXPECT_EQ(v.id("<eos>"), Vocabulary::eos);
    EXPECT_EQ(v.id("<unk>"), Vocabulary::unk);
    const auto ids = v.encode("Hello, world");
    EXPECT_EQ(v.decode(ids), "hello <unk> world");
    EXPECT_THROW(v.token(99), Error);

    malm::testing::TempDir dir("vocab");
    v.save(dir / "vocab.txt");
    EXPECT_EQ(Vocabulary::load(dir / "vocab.txt"), v);
}

TEST(Vocabulary, EmptyCorpusRejected) {
    std::vector<std::string> corpus;
    EXPECT_THROW(Vocabulary::build(corpus, 10), Error);
}

TEST(Dataset, ReadsRecordsAndDefaultsIds) {
    std::istringstream in(
        R"({"question": "q1", "knowledge": "k1", "right_answer": "a1"})"
        "\n\n"
        R"({"id": "x", "question": "q2", "knowledge": "", "right_answer": "a2"})"
        "\n");
    auto records = read_records(in, "mem");
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].id, "0");
    EXPECT_EQ(records[1].id, "x");
    EXPECT_EQ(records[1].line, 3u);
}

TEST(Dataset, ErrorsCarryLocationAndKind) {
    std::istringstream bad_json("{\"question\": \"q\"\n");
    try {
        read_records(bad_json, "data.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("data.jsonl:1"), std::string::npos);
    }
    std::istringstream missing(R"({"question": "q", "knowledge": "k"})");
    try {
        read_records(missing, "data.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::schema);
        EXPECT_NE(std::string(e.what()).find("right_answer"), std::string::npos);
    }
}

TEST(Dataset, EncodeRejectsEmptyAnswer) {
    Vocabulary v = Vocabulary::from_tokens({"q"});
    Record r{"1", 1, "q", "", "  "};
    EXPECT_THROW(encode_record(r, v), Error);
}

TEST(Dataset, WriteReadRoundTrip) {
    malm::testing::TempDir dir("dataset");
    std::vector<Record> records{{"a", 0, "what is x ?", "x is 1 .", "1"}, {"b", 0, "q", "", "y"}};
    write_records(dir / "d.jsonl", records);
    auto back = read_records(dir / "d.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].question, records[0].question);
    EXPECT_EQ(back[1].knowledge, "");
}

TEST(Split, SizesAndOrder) {
    std::vector<int> items(10);
    std::iota(items.begin(), items.end(), 0);
    Rng rng(4);
    auto [train, test] = split_dataset(items, 0.8, rng);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(test.size(), 2u);
    EXPECT_TRUE(std::is_sorted(train.begin(), train.end()));
    EXPECT_TRUE(std::is_sorted(test.begin(), test.end()));
    auto [t2, s2] = split_dataset(items, 0.01, rng);
    EXPECT_EQ(t2.size(), 1u);
    std::vector<int> one{1};
    EXPECT_THROW(split_dataset(one, 0.5, rng), Error);
}

}  // namespace
}  // namespace malm::text
