// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/toy_data.hpp"
#include "support.hpp"

namespace malm {
namespace {

using testing::TempDir;

std::optional<ErrorKind> kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------
// config

TEST(Config, BareFileKeepsRecipeDefaults) {
    TempDir dir("cfg");
    write_text(dir / "exp.ini", "[data]\ntrain = a.jsonl\ntest = b.jsonl\n");
    const ExperimentConfig c = ExperimentConfig::load(dir / "exp.ini");
    EXPECT_EQ(c.adapter.layers, 2u);
    EXPECT_EQ(c.adapter.heads, 8u);
    EXPECT_DOUBLE_EQ(c.adapter.residual, 0.2);
    EXPECT_DOUBLE_EQ(c.adapter.dropout, 0.1);
    EXPECT_DOUBLE_EQ(c.train.optimizer.lr, 5e-4);
    EXPECT_EQ(c.train.epochs, 2u);
    EXPECT_EQ(c.train.batch_size, 1u);
    EXPECT_EQ(c.train.accumulation, 64u);
    EXPECT_EQ(c.decoding.mode, DecodingMode::greedy);
    EXPECT_EQ(c.train_path, dir / "a.jsonl");
    EXPECT_EQ(c.test_path, dir / "b.jsonl");
    EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{7});
}

TEST(Config, ParsesListsAndSections) {
    TempDir dir("cfg");
    write_text(dir / "exp.ini",
               "[run]\nseeds = 1, 2,3\n[lora]\ntargets = attn.wq,ffn.w1\n[adapter]\nlayers = 3\nactivation = tanh\n"
               "[retrieval]\nmode = bm25\nindex = /abs/idx.bin\nk = 7\naccuracy_ks = 1,10\n"
               "[decoding]\nmode = top_k\ntop_k = 3\n");
    const ExperimentConfig c = ExperimentConfig::load(dir / "exp.ini");
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(c.lora.targets, (std::vector<std::string>{"attn.wq", "ffn.w1"}));
    EXPECT_EQ(c.adapter.layers, 3u);
    EXPECT_EQ(c.adapter.activation, Activation::tanh);
    EXPECT_EQ(c.retrieval.mode, KnowledgeSource::bm25);
    EXPECT_EQ(c.retrieval.index, std::filesystem::path("/abs/idx.bin"));
    EXPECT_EQ(c.retrieval.k, 7u);
    EXPECT_EQ(c.retrieval.accuracy_ks, (std::vector<std::size_t>{1, 10}));
    EXPECT_EQ(c.decoding.mode, DecodingMode::top_k);
    EXPECT_EQ(c.decoding.top_k, 3u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    TempDir dir("cfg");
    write_text(dir / "a.ini", "[adapter]\nlayer = 2\n");
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "a.ini"); }), ErrorKind::config);
    write_text(dir / "b.ini", "[extra]\nx = 1\n");
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "b.ini"); }), ErrorKind::config);
    write_text(dir / "c.ini", "[train]\nepochs = two\n");
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "c.ini"); }), ErrorKind::config);
    write_text(dir / "d.ini", "[train]\nepochs = -1\n");
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "d.ini"); }), ErrorKind::config);
    write_text(dir / "e.ini", "[adapter\n");
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "e.ini"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([&] { ExperimentConfig::load(dir / "missing.ini"); }), ErrorKind::io);
}

TEST(Config, ValidateChecksLaunchInputs) {
    TempDir dir("cfg");
    write_text(dir / "train.jsonl", "");
    write_text(dir / "test.jsonl", "");
    ExperimentConfig c;
    c.train_path = dir / "train.jsonl";
    c.test_path = dir / "test.jsonl";
    EXPECT_NO_THROW(c.validate());
    c.seeds.clear();
    EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::config);
    c.seeds = {1};
    c.foundation_checkpoint = dir / "nope.ckpt";
    EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::io);
    c.foundation_checkpoint.clear();
    c.retrieval.mode = KnowledgeSource::bm25;
    EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::config);
}

TEST(Config, JsonRoundTripKeepsHash) {
    ExperimentConfig c;
    c.seeds = {3, 4};
    c.adapter.residual = 0.35;
    c.lora.targets = {"ffn.w2"};
    c.retrieval.mode = KnowledgeSource::bm25;
    const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    c.adapter.residual = 0.3;
    EXPECT_NE(back.hash(), c.hash());
}

TEST(Config, OutputRootFromEnvironment) {
    ::setenv("MALM_OUTPUT_ROOT", "/tmp/root", 1);
    EXPECT_EQ(resolve_output_dir("runs/x"), std::filesystem::path("/tmp/root/runs/x"));
    EXPECT_EQ(resolve_output_dir("/abs"), std::filesystem::path("/abs"));
    ::unsetenv("MALM_OUTPUT_ROOT");
    EXPECT_EQ(resolve_output_dir("runs/x"), std::filesystem::path("runs/x"));
}

// ---------------------------------------------------------------------------
// toy data

TEST(ToyData, SplitsByEntityAndAnswersOnlyInKnowledge) {
    const ToyData d = make_toy_data({});
    ASSERT_EQ(d.train.size(), 500u);
    ASSERT_EQ(d.test.size(), 100u);
    EXPECT_EQ(d.corpus.size(), 600u);
    std::set<std::string> train_questions;
    for (const auto& r : d.train) {
        train_questions.insert(r.question);
    }
    for (const auto* split : {&d.train, &d.test}) {
        for (const auto& r : *split) {
            EXPECT_NE(r.knowledge.find(" " + r.right_answer + " "), std::string::npos);
            EXPECT_EQ(r.question.find(r.right_answer), std::string::npos);
        }
    }
    for (const auto& r : d.test) {
        EXPECT_EQ(train_questions.count(r.question), 0u) << r.question;
    }
    const ToyData again = make_toy_data({});
    EXPECT_EQ(again.test.back().knowledge, d.test.back().knowledge);
}

TEST(ToyData, DistractorsStayInSplit) {
    ToyDataConfig cfg;
    cfg.train = 30;
    cfg.test = 10;
    cfg.distractors = 3;
    const ToyData d = make_toy_data(cfg);
    std::set<std::string> test_entities;
    for (const auto& doc : d.corpus) {
        if (std::stoi(doc.id.substr(4)) >= 30) {
            test_entities.insert(doc.title);
        }
    }
    for (const auto& r : d.train) {
        for (const auto& e : test_entities) {
            EXPECT_EQ(r.knowledge.find(e), std::string::npos);
        }
    }
    EXPECT_EQ(std::count(d.test[0].knowledge.begin(), d.test[0].knowledge.end(), '.'), 4);
}

// ---------------------------------------------------------------------------
// experiment drivers on a tiny instance

class Experiments : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("exp");
        ToyDataConfig tc;
        tc.train = 24;
        tc.test = 8;
        tc.first_words = 8;
        tc.second_words = 8;
        tc.codes = 10;
        write_toy_data(dir_->path() / "data", make_toy_data(tc));
        ExperimentConfig c = base_config("pretrain");
        const PreparedData data = prepare_data(c);
        foundation_ = new std::filesystem::path(data.foundation_path);
        vocab_ = new std::filesystem::path(dir_->path() / "pretrain" / "vocab.txt");
    }
    static void TearDownTestSuite() {
        delete foundation_;
        delete vocab_;
        delete dir_;
    }

    static ExperimentConfig base_config(const std::string& out) {
        ExperimentConfig c;
        c.train_path = dir_->path() / "data" / "train.jsonl";
        c.test_path = dir_->path() / "data" / "test.jsonl";
        c.output_dir = dir_->path() / out;
        c.seeds = {1, 2};
        c.foundation.width = 16;
        c.foundation.blocks = 1;
        c.foundation.heads = 2;
        c.foundation.ffn_width = 32;
        c.foundation.max_seq_len = 64;
        c.pretrain.steps = 300;
        c.adapter.layers = 1;
        c.adapter.heads = 2;
        c.lora.rank = 2;
        c.train.epochs = 1;
        c.train.accumulation = 4;
        c.decoding.max_len = 4;
        if (foundation_ != nullptr) {
            c.foundation_checkpoint = *foundation_;
            c.vocab_path = *vocab_;
        }
        return c;
    }

    static TempDir* dir_;
    static std::filesystem::path* foundation_;
    static std::filesystem::path* vocab_;
};

TempDir* Experiments::dir_ = nullptr;
std::filesystem::path* Experiments::foundation_ = nullptr;
std::filesystem::path* Experiments::vocab_ = nullptr;

void expect_same_reports(const MetricReport& a, const MetricReport& b) {
    EXPECT_EQ(a.to_json(true), b.to_json(true));
}

TEST_F(Experiments, CompareWritesArtifactsAndMeanAggregate) {
    const ExperimentConfig c = base_config("compare");
    const RunManifest m = run_compare(c);
    ASSERT_EQ(m.rows.size(), 2u);
    EXPECT_EQ(m.rows[0].arm.slug, "baseline");
    EXPECT_EQ(m.rows[1].arm.slug, "malm");
    EXPECT_EQ(m.config_hash, c.hash());
    EXPECT_EQ(m.foundation_digest, file_digest(*foundation_));
    for (const RunRow& row : m.rows) {
        ASSERT_EQ(row.seeds.size(), 2u);
        for (const SeedRun& s : row.seeds) {
            EXPECT_TRUE(std::filesystem::exists(s.checkpoint));
            EXPECT_TRUE(std::filesystem::exists(s.generations));
            EXPECT_TRUE(std::filesystem::exists(s.train_log));
            EXPECT_GT(s.optimizer_steps, 0u);
        }
        const MetricReport& a = row.seeds[0].report;
        const MetricReport& b = row.seeds[1].report;
        EXPECT_NEAR(row.aggregate.rouge1, (a.rouge1 + b.rouge1) / 2, 1e-9);
        EXPECT_NEAR(row.aggregate.rougeL, (a.rougeL + b.rougeL) / 2, 1e-9);
        EXPECT_NEAR(row.aggregate.exact_match, (a.exact_match + b.exact_match) / 2, 1e-9);
        EXPECT_NEAR(row.aggregate.bleu, (a.bleu + b.bleu) / 2, 1e-9);
    }
    const RunManifest loaded = RunManifest::load(resolve_output_dir(c.output_dir) / "manifest.json");
    EXPECT_EQ(loaded.to_json(), m.to_json());
    EXPECT_NE(m.table().find("MALM"), std::string::npos);
}

TEST_F(Experiments, RerunIsBitIdenticalAndInputsUntouched) {
    const std::string train_digest = file_digest(base_config("x").train_path);
    const std::string ckpt_digest = file_digest(*foundation_);
    ExperimentConfig c = base_config("rerun-a");
    c.seeds = {5};
    const RunManifest a = run_compare(c);
    c.output_dir = dir_->path() / "rerun-b";
    const RunManifest b = run_compare(c);
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        EXPECT_EQ(slurp(a.rows[r].seeds[0].generations), slurp(b.rows[r].seeds[0].generations));
        EXPECT_EQ(slurp(a.rows[r].seeds[0].train_log).size() > 0, true);
        expect_same_reports(a.rows[r].aggregate, b.rows[r].aggregate);
    }
    EXPECT_EQ(file_digest(base_config("x").train_path), train_digest);
    EXPECT_EQ(file_digest(*foundation_), ckpt_digest);
}

TEST_F(Experiments, LayerSweepZeroRowIsBaseline) {
    ExperimentConfig c = base_config("sweep");
    c.seeds = {3};
    const std::size_t layers[] = {0, 1, 2};
    const RunManifest sweep = run_layer_sweep(c, layers);
    ASSERT_EQ(sweep.rows.size(), 3u);
    c.output_dir = dir_->path() / "sweep-compare";
    const RunManifest cmp = run_compare(c);
    EXPECT_EQ(sweep.foundation_digest, cmp.foundation_digest);
    EXPECT_EQ(slurp(sweep.row("layers-0").seeds[0].generations), slurp(cmp.row("baseline").seeds[0].generations));
    expect_same_reports(sweep.row("layers-0").aggregate, cmp.row("baseline").aggregate);
    expect_same_reports(sweep.row("layers-1").aggregate, cmp.row("malm").aggregate);
}

TEST_F(Experiments, AblationFullRowMatchesCompare) {
    ExperimentConfig c = base_config("ablate");
    c.seeds = {4};
    const RunManifest abl = run_ablation(c);
    ASSERT_EQ(abl.rows.size(), 5u);
    std::set<std::string> labels;
    for (const RunRow& r : abl.rows) {
        labels.insert(r.arm.label);
    }
    EXPECT_EQ(labels, (std::set<std::string>{"MALM", "w/o Context", "w/ Full Context", "w/o Input", "w/o Knowledge"}));
    c.output_dir = dir_->path() / "ablate-compare";
    const RunManifest cmp = run_compare(c);
    EXPECT_EQ(slurp(abl.row("malm").seeds[0].generations), slurp(cmp.row("malm").seeds[0].generations));
}

TEST_F(Experiments, ZeroResidualMatchesFoundationOnlyArm) {
    ExperimentConfig c = base_config("lambda0");
    c.seeds = {6};
    c.adapter.residual = 0.0;
    const PreparedData data = prepare_data(c);
    ArmSpec plain;
    plain.label = "foundation";
    plain.slug = "foundation";
    plain.layers = 0;
    const SeedRun adapter = run_arm(c, data, adapter_arm(c), 6, dir_->path() / "lambda0" / "a");
    const SeedRun foundation = run_arm(c, data, plain, 6, dir_->path() / "lambda0" / "f");
    EXPECT_EQ(slurp(adapter.generations), slurp(foundation.generations));
}

TEST_F(Experiments, RagDatasetModeMatchesCompare) {
    ExperimentConfig c = base_config("rag-dataset");
    c.seeds = {2};
    const RunManifest rag = run_rag(c);
    c.output_dir = dir_->path() / "rag-dataset-compare";
    const RunManifest cmp = run_compare(c);
    ASSERT_EQ(rag.rows.size(), cmp.rows.size());
    for (std::size_t r = 0; r < rag.rows.size(); ++r) {
        EXPECT_EQ(slurp(rag.rows[r].seeds[0].generations), slurp(cmp.rows[r].seeds[0].generations));
    }
}

TEST_F(Experiments, RagBm25ReportsAccuracyAndEmptyRetrievals) {
    const auto docs = read_corpus(dir_->path() / "data" / "corpus.jsonl");
    const InvertedIndex index = InvertedIndex::build(chunk_corpus(docs, 100));
    index.save(dir_->path() / "toy.idx");
    ExperimentConfig c = base_config("rag-bm25");
    c.seeds = {2};
    c.retrieval.mode = KnowledgeSource::bm25;
    c.retrieval.index = dir_->path() / "toy.idx";
    c.retrieval.accuracy_ks = {1, 5, 20};
    const RunManifest m = run_rag(c);
    ASSERT_TRUE(m.extras.contains("topk_accuracy"));
    const auto& acc = m.extras["topk_accuracy"];
    EXPECT_LE(acc["1"].get<double>(), acc["5"].get<double>());
    EXPECT_LE(acc["5"].get<double>(), acc["20"].get<double>());
    EXPECT_GE(acc["1"].get<double>(), 50.0);
    EXPECT_EQ(m.extras["empty_retrievals"]["test"].get<std::size_t>(), 0u);
}

TEST(Retrieval, AttachCountsEmptyResults) {
    const std::vector<Document> docs{{"d", "", "alpha beta gamma"}};
    const InvertedIndex index = InvertedIndex::build(chunk_corpus(docs, 100));
    const auto vocab = text::Vocabulary::from_tokens({"alpha", "beta", "gamma", "zeta"});
    std::vector<text::Sample> samples(2);
    samples[0].question_text = "beta ?";
    samples[1].question_text = "zeta ?";
    EXPECT_EQ(attach_retrieved_knowledge(samples, index, 5, vocab), 1u);
    EXPECT_EQ(samples[0].knowledge_text, "alpha beta gamma");
    EXPECT_TRUE(samples[1].knowledge.empty());
}

}  // namespace
}  // namespace malm
