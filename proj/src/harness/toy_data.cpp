// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "harness/toy_data.hpp"

#include <set>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace malm {
namespace {

constexpr const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* vowels[] = {"a", "e", "i", "o", "u"};

// Distinct pronounceable words of the form CVCV, drawn without replacement.
std::vector<std::string> make_words(std::size_t count, Rng& rng, std::set<std::string>& used) {
    constexpr std::size_t n_on = std::size(onsets);
    constexpr std::size_t n_vo = std::size(vowels);
    const std::size_t space = n_on * n_vo * n_on * n_vo;
    if (used.size() + count > space) {
        fail(ErrorKind::config, "toy data: word pool too large");
    }
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w = std::string(onsets[rng.below(n_on)]) + vowels[rng.below(n_vo)] + onsets[rng.below(n_on)] +
                        vowels[rng.below(n_vo)];
        if (used.insert(w).second) {
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::string fact(const std::string& entity, const std::string& code) {
    return "the code of " + entity + " is " + code + " .";
}

}  // namespace

void ToyDataConfig::validate() const {
    if (train == 0 || test == 0 || codes == 0) {
        fail(ErrorKind::config, "toy data: train, test and codes must be >= 1");
    }
    if (train + test > first_words * second_words) {
        fail(ErrorKind::config, "toy data: " + std::to_string(first_words * second_words) +
                                    " entity names cannot cover " + std::to_string(train + test) + " items");
    }
}

nlohmann::json ToyDataConfig::to_json() const {
    return {{"train", train},   {"test", test},
            {"first_words", first_words}, {"second_words", second_words},
            {"codes", codes},   {"distractors", distractors},
            {"seed", seed}};
}

ToyDataConfig ToyDataConfig::from_json(const nlohmann::json& j) {
    ToyDataConfig c;
    c.train = j.value("train", c.train);
    c.test = j.value("test", c.test);
    c.first_words = j.value("first_words", c.first_words);
    c.second_words = j.value("second_words", c.second_words);
    c.codes = j.value("codes", c.codes);
    c.distractors = j.value("distractors", c.distractors);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

ToyData make_toy_data(const ToyDataConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::set<std::string> used = {"the", "code", "of", "is", "what"};
    const auto first = make_words(config.first_words, rng, used);
    const auto second = make_words(config.second_words, rng, used);
    std::vector<std::string> codes;
    for (std::size_t i = 0; i < config.codes; ++i) {
        codes.push_back("c" + std::to_string(100 + i));
    }

    std::vector<std::size_t> pairs(config.first_words * config.second_words);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i] = i;
    }
    rng.shuffle(std::span<std::size_t>(pairs));
    const std::size_t total = config.train + config.test;
    std::vector<std::string> entities;
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < total; ++i) {
        entities.push_back(first[pairs[i] / config.second_words] + " " + second[pairs[i] % config.second_words]);
        answers.push_back(codes[rng.below(codes.size())]);
    }

    ToyData data;
    for (std::size_t i = 0; i < total; ++i) {
        data.corpus.push_back({"doc-" + std::to_string(i), entities[i], fact(entities[i], answers[i])});
    }
    for (std::size_t i = 0; i < total; ++i) {
        const bool is_train = i < config.train;
        const std::size_t lo = is_train ? 0 : config.train;
        const std::size_t hi = is_train ? config.train : total;
        std::vector<std::string> facts = {fact(entities[i], answers[i])};
        for (std::size_t d = 0; d < config.distractors && hi - lo > 1; ++d) {
            std::size_t other = lo + rng.below(hi - lo - 1);
            if (other >= i) {
                ++other;
            }
            facts.push_back(fact(entities[other], answers[other]));
        }
        rng.shuffle(std::span<std::string>(facts));
        text::Record r;
        r.id = (is_train ? "train-" : "test-") + std::to_string(i - lo);
        r.question = "what is the code of " + entities[i] + " ?";
        for (std::size_t f = 0; f < facts.size(); ++f) {
            r.knowledge += (f ? " " : "") + facts[f];
        }
        r.right_answer = answers[i];
        (is_train ? data.train : data.test).push_back(std::move(r));
    }
    return data;
}

void write_toy_data(const std::filesystem::path& dir, const ToyData& data) {
    std::filesystem::create_directories(dir);
    text::write_records(dir / "train.jsonl", data.train);
    text::write_records(dir / "test.jsonl", data.test);
    write_corpus(dir / "corpus.jsonl", data.corpus);
}

}  // namespace malm
