// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "common/error.hpp"
#include "metrics/metrics.hpp"
#include "support.hpp"
#include "text/normalize.hpp"

namespace malm {
namespace {

// Hand-worked fixture (metric tokens keep articles; EM drops them).
//   1: "the cat" / "the cat sat"          R1 80, R2 66.67, RL 80, EM 0
//   2: "a c b" / "a b c"                   R1 100, R2 0, RL 66.67, EM 0
//   3: "Wheel of Time" / "The Wheel of Time."  R1 85.71, R2 80, RL 85.71, EM 1
// BLEU: c = 8, r = 10; p1 = 8/8, p2 = 3/5, p3 = 1/2, no 4-grams.
const std::vector<Reference> kRefs{{"1", "the cat sat"}, {"2", "a b c"}, {"3", "The Wheel of Time."}};
const std::vector<GeneratedText> kHyps{{"1", "the cat"}, {"2", "a c b"}, {"3", "Wheel of Time"}};

TEST(Rouge, HandExamples) {
    EXPECT_NEAR(rouge_n("the cat", "the cat sat", 1), 80.0, 1e-9);
    EXPECT_NEAR(rouge_l("a c b", "a b c"), 200.0 / 3.0, 1e-9);
    EXPECT_EQ(rouge_n("x y", "x y", 2), 100.0);
    EXPECT_EQ(rouge_n("alpha", "beta", 1), 0.0);
    EXPECT_EQ(rouge_l("", "beta"), 0.0);
    EXPECT_EQ(rouge_n("beta", "", 1), 0.0);
    EXPECT_THROW(rouge_n("a", "a", 3), Error);
}

TEST(ExactMatch, Cases) {
    EXPECT_EQ(exact_match("Wheel of Time", "Wheel of Time"), 1);
    EXPECT_EQ(exact_match("The Wheel of Time.", "wheel of time"), 1);
    EXPECT_EQ(exact_match("13,250", "110,925"), 0);
}

TEST(Bleu, IdentityAndBrevity) {
    std::vector<std::string> refs{"one two three four five", "six seven"};
    auto same = bleu(refs, refs);
    EXPECT_DOUBLE_EQ(same.score, 100.0);
    EXPECT_DOUBLE_EQ(same.brevity_penalty, 1.0);

    std::string hyp;
    std::string ref;
    for (int i = 0; i < 1151; ++i) {
        ref += " r" + std::to_string(i);
        if (i < 1000) {
            hyp += " r" + std::to_string(i);
        }
    }
    std::vector<std::string> h{hyp};
    std::vector<std::string> r{ref};
    auto b = bleu(h, r);
    EXPECT_NEAR(b.brevity_penalty, 0.86, 1e-3);
    EXPECT_NEAR(b.brevity_penalty, std::exp(1.0 - 1151.0 / 1000.0), 1e-12);

    std::vector<std::string> equal_len{"p q r"};
    std::vector<std::string> other{"x y z"};
    EXPECT_DOUBLE_EQ(bleu(equal_len, other).brevity_penalty, 1.0);
}

TEST(Bleu, Contracts) {
    std::vector<std::string> none;
    EXPECT_THROW(bleu(none, none), Error);
    std::vector<std::string> one{"a"};
    std::vector<std::string> two{"a", "b"};
    EXPECT_THROW(bleu(one, two), Error);
}

TEST(Bleu, PermutationInvariant) {
    Rng rng(3);
    std::vector<std::string> h;
    std::vector<std::string> r;
    for (int i = 0; i < 30; ++i) {
        std::string a;
        std::string b;
        for (std::size_t w = 0, n = 1 + rng.below(8); w < n; ++w) {
            a += " t" + std::to_string(rng.below(6));
        }
        for (std::size_t w = 0, n = 1 + rng.below(8); w < n; ++w) {
            b += " t" + std::to_string(rng.below(6));
        }
        h.push_back(a);
        r.push_back(b);
    }
    const double base = bleu(h, r).score;
    std::vector<std::size_t> order(h.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::string> h2;
    std::vector<std::string> r2;
    for (std::size_t i : order) {
        h2.push_back(h[i]);
        r2.push_back(r[i]);
    }
    EXPECT_EQ(bleu(h2, r2).score, base);
}

TEST(Report, ThreeSampleFixture) {
    MetricReport rep = evaluate_outputs(kHyps, kRefs);
    EXPECT_NEAR(rep.rouge1, (80.0 + 100.0 + 600.0 / 7.0) / 3.0, 1e-6);
    EXPECT_NEAR(rep.rouge2, (200.0 / 3.0 + 0.0 + 80.0) / 3.0, 1e-6);
    EXPECT_NEAR(rep.rougeL, (80.0 + 200.0 / 3.0 + 600.0 / 7.0) / 3.0, 1e-6);
    EXPECT_NEAR(rep.exact_match, 100.0 / 3.0, 1e-6);
    EXPECT_NEAR(rep.brevity_penalty, std::exp(-0.25), 1e-6);
    EXPECT_NEAR(rep.bleu, 100.0 * std::exp(-0.25) * std::cbrt(1.0 * 0.6 * 0.5), 1e-6);
    ASSERT_EQ(rep.samples.size(), 3u);
    EXPECT_EQ(rep.samples[2].exact_match, 1);
}

TEST(Report, PerfectAndEmpty) {
    std::vector<GeneratedText> perfect;
    std::vector<GeneratedText> empty;
    for (const Reference& r : kRefs) {
        perfect.push_back({r.id, r.answer});
        empty.push_back({r.id, ""});
    }
    MetricReport p = evaluate_outputs(perfect, kRefs);
    EXPECT_EQ(p.rouge1, 100.0);
    EXPECT_EQ(p.rouge2, (100.0 + 100.0 + 100.0) / 3.0);
    EXPECT_EQ(p.rougeL, 100.0);
    EXPECT_EQ(p.exact_match, 100.0);
    EXPECT_DOUBLE_EQ(p.bleu, 100.0);
    MetricReport e = evaluate_outputs(empty, kRefs);
    EXPECT_EQ(e.rouge1, 0.0);
    EXPECT_EQ(e.rougeL, 0.0);
    EXPECT_EQ(e.exact_match, 0.0);
    EXPECT_EQ(e.bleu, 0.0);
}

TEST(Report, AlignmentErrorListsMissingIds) {
    std::vector<GeneratedText> partial{kHyps[0]};
    try {
        evaluate_outputs(partial, kRefs);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::alignment);
        EXPECT_NE(std::string(e.what()).find("missing ids: 2, 3"), std::string::npos) << e.what();
    }
}

TEST(Report, RunFileAndJson) {
    testing::TempDir dir("metrics");
    write_generations(dir / "gen.jsonl", kHyps);
    MetricReport rep = evaluate_run(dir / "gen.jsonl", kRefs);
    MetricReport back = MetricReport::from_json(rep.to_json());
    EXPECT_EQ(back.rouge1, rep.rouge1);
    EXPECT_EQ(back.samples.size(), 3u);
    std::vector<std::pair<std::string, MetricReport>> rows{{"MALM", rep}};
    const std::string table = format_report_table(rows);
    EXPECT_NE(table.find("ROUGE-1"), std::string::npos);
    EXPECT_NE(table.find("Exact Match"), std::string::npos);
}

TEST(Report, MeanOfSeeds) {
    MetricReport a;
    a.rouge1 = 10;
    a.bleu = 4;
    MetricReport b;
    b.rouge1 = 20;
    b.bleu = 8;
    std::vector<MetricReport> both{a, b};
    MetricReport m = mean_report(both);
    EXPECT_DOUBLE_EQ(m.rouge1, 15.0);
    EXPECT_DOUBLE_EQ(m.bleu, 6.0);
}

TEST(Properties, RandomPairs) {
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        std::string h;
        std::string r;
        for (std::size_t w = 0, n = rng.below(7); w < n; ++w) {
            h += (rng.below(5) == 0 ? " the" : " v" + std::to_string(rng.below(5)));
        }
        for (std::size_t w = 0, n = 1 + rng.below(7); w < n; ++w) {
            r += (rng.below(5) == 0 ? " a" : " v" + std::to_string(rng.below(5)));
        }
        const double r1 = rouge_n(h, r, 1);
        const double r2 = rouge_n(h, r, 2);
        EXPECT_GE(r1, r2);
        for (double v : {r1, r2, rouge_l(h, r)}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 100.0);
        }
        EXPECT_NEAR(rouge_n(r, r, 1), 100.0, 1e-9);
        EXPECT_NEAR(rouge_l(r, r), 100.0, 1e-9);
        if (exact_match(h, r) == 1) {
            const std::string nh = text::normalize_answer(h);
            const std::string nr = text::normalize_answer(r);
            if (!nr.empty()) {
                EXPECT_NEAR(rouge_n(nh, nr, 1), 100.0, 1e-9);
                EXPECT_NEAR(rouge_l(nh, nr), 100.0, 1e-9);
            }
        }
    }
}

}  // namespace
}  // namespace malm
