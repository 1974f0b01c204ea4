// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion names as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adapter/gat.hpp"
#include "adapter/graph.hpp"
#include "adapter/model.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/toy_data.hpp"
#include "metrics/metrics.hpp"
#include "oracles.hpp"
#include "retrieval/bm25.hpp"
#include "support.hpp"
#include "train/trainer.hpp"

#ifndef MALM_SOURCE_DIR
#error "MALM_SOURCE_DIR must point at the source tree"
#endif

namespace malm {
namespace {

// Tolerances.
constexpr double kGradientRelTol = 1e-4;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kAttentionTol = 1e-9;
constexpr double kBm25FixtureTol = 1e-9;
constexpr double kMetricTol = 1e-6;
constexpr double kBrevityTol = 1e-3;
constexpr double kDeterminismTol = 1e-9;
constexpr double kSeparationPoints = 20.0;
constexpr double kKnowledgeAblationBand = 10.0;
constexpr double kToyBudgetSeconds = 30.0 * 60.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<TokenId> t(n);
    for (auto& x : t) {
        x = static_cast<TokenId>(text::Vocabulary::reserved + rng.below(vocab - text::Vocabulary::reserved));
    }
    return t;
}

MalmModel random_model(Rng& rng, std::size_t vocab, std::size_t width, std::size_t layers, std::size_t heads,
                       double residual) {
    FoundationConfig fc;
    fc.vocab_size = vocab;
    fc.width = width;
    fc.blocks = 1;
    fc.heads = 2;
    fc.ffn_width = 2 * width;
    fc.max_seq_len = 64;
    MalmModel m;
    m.foundation = Foundation(fc, rng);
    m.adapter_config.layers = layers;
    m.adapter_config.heads = heads;
    m.adapter_config.residual = residual;
    if (layers > 0) {
        m.adapter = AdapterParams::init(width, m.adapter_config, rng);
    }
    return m;
}

// With λ = 0 or L = 0 decoding must equal the foundation's own greedy decoding.
Outcome reduction_identity() {
    Rng rng(101);
    DecodingConfig dc;
    dc.max_len = 8;
    std::size_t cases = 0;
    std::size_t tokens = 0;
    for (auto [layers, residual] : {std::pair<std::size_t, double>{2, 0.0}, {0, 0.2}}) {
        for (int model_i = 0; model_i < 10; ++model_i) {
            const MalmModel m = random_model(rng, 40, 16, layers, 4, residual);
            for (int trial = 0; trial < 10; ++trial) {
                const auto q = random_ids(rng, 1 + rng.below(8), 40);
                const auto k = random_ids(rng, rng.below(10), 40);
                const Generation a = generate(m, q, k, dc);
                const Generation b = generate_foundation_only(m.foundation, nullptr, q, dc);
                if (a.tokens != b.tokens || a.truncated != b.truncated) {
                    return {false, "mismatch at L=" + std::to_string(layers) + " trial " + std::to_string(trial)};
                }
                ++cases;
                tokens += a.tokens.size();
            }
        }
    }
    return {true, std::to_string(cases / 2) + " inputs per setting (lambda=0, L=0), " + std::to_string(tokens) +
                      " tokens compared"};
}

// Teacher-forced loss on a 12-node graph (M = C = S = 4, d = 8, H = 2, L = 2).
Outcome gradient_correctness() {
    Rng rng(202);
    MalmModel m = random_model(rng, 30, 8, 2, 2, 0.2);
    m.foundation.params().set_requires_grad(false);
    for (Tensor& t : m.adapter.trainables()) {
        t.set_requires_grad(true);
    }
    text::Sample s;
    s.question = random_ids(rng, 4, 30);
    s.answer = random_ids(rng, 3, 30);
    s.knowledge = random_ids(rng, 4, 30);
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0;
    for (bool training : {false, true}) {
        auto loss = [&] {
            Rng drop(17);
            return teacher_forced_loss(m, s, drop, training);
        };
        const auto g = testing::check_gradients(loss, m.adapter.trainables(), kFiniteDiffStep);
        checked += g.checked;
        if (g.max_rel_error > worst) {
            worst = g.max_rel_error;
            where = g.worst;
        }
    }
    return {worst < kGradientRelTol,
            std::to_string(checked) + " partials (dropout off and on), max rel err " + fmt("%.2e", worst) +
                (worst >= kGradientRelTol ? " at " + where : "")};
}

Outcome adjacency_structure() {
    Rng rng(303);
    std::size_t layouts = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.below(12);
        const std::size_t c = 1 + rng.below(12);
        const std::size_t s = rng.below(12);
        const GraphLayout layout{m, c, s};
        for (const Ablation& ab : testing::kVariants) {
            const Adjacency adj = build_adjacency(layout, ab);
            const testing::EdgeOracle o{m, c, s, ab};
            for (std::size_t p = 0; p < layout.total(); ++p) {
                for (std::size_t q = 0; q < layout.total(); ++q) {
                    if (adj.edge(p, q) != o.edge(p, q)) {
                        return {false, "edge (" + std::to_string(p) + "," + std::to_string(q) + ") in " + ab.label()};
                    }
                }
            }
            if (adj.edge_count() != testing::expected_edges(m, c, s, ab)) {
                return {false, "edge count for " + ab.label()};
            }
        }
        ++layouts;
    }
    return {true, std::to_string(layouts) + " layouts x " + std::to_string(testing::kVariants.size()) + " variants"};
}

Outcome attention_normalisation() {
    Rng rng(404);
    double worst_sum = 0.0;
    double worst_perm = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.below(6);
        const std::size_t c = 1 + rng.below(6);
        const std::size_t s = 2 + rng.below(6);
        const std::size_t d = 8;
        AdapterConfig cfg;
        cfg.layers = 2;
        cfg.heads = 2;
        const AdapterParams params = AdapterParams::init(d, cfg, rng);
        const Tensor in = Tensor::randn(m, d, 1.0, rng);
        const Tensor out = Tensor::randn(c, d, 1.0, rng);
        const Tensor kn = Tensor::randn(s, d, 1.0, rng);

        for (bool training : {false, true}) {
            std::vector<LayerTrace> traces;
            Rng drop(trial);
            adapter_graph_forward(in, out, kn, params, cfg, drop, training, &traces);
            const std::size_t n = m + c + s;
            for (const LayerTrace& t : traces) {
                for (const auto& alpha : t.attention) {
                    for (std::size_t q = 0; q < n; ++q) {
                        double total = 0.0;
                        for (std::size_t p = 0; p < n; ++p) {
                            total += alpha[q * n + p];
                        }
                        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
                    }
                }
            }
        }

        std::vector<std::size_t> perm(s);
        for (std::size_t i = 0; i < s; ++i) {
            perm[i] = i;
        }
        rng.shuffle(std::span<std::size_t>(perm));
        std::vector<Tensor> rows;
        for (std::size_t i : perm) {
            rows.push_back(slice_rows(kn, i, 1));
        }
        Rng r1(0);
        Rng r2(0);
        const Tensor a = adapter_graph_forward(in, out, kn, params, cfg, r1, false);
        const Tensor b = adapter_graph_forward(in, out, concat_rows(rows), params, cfg, r2, false);
        for (std::size_t v = m; v < m + c; ++v) {
            for (std::size_t j = 0; j < d; ++j) {
                worst_perm = std::max(worst_perm, std::abs(a(v, j) - b(v, j)));
            }
        }
    }
    return {worst_sum <= kAttentionTol && worst_perm <= kAttentionTol,
            "100 instances, max |row sum - 1| " + fmt("%.1e", worst_sum) + ", max output change under permutation " +
                fmt("%.1e", worst_perm)};
}

ExperimentConfig toy_recipe(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir) {
    ExperimentConfig c = ExperimentConfig::load(std::filesystem::path(MALM_SOURCE_DIR) / "configs" / "toy.ini");
    c.train_path = data_dir / "train.jsonl";
    c.test_path = data_dir / "test.jsonl";
    c.output_dir = out_dir;
    c.foundation_checkpoint.clear();
    c.vocab_path.clear();
    c.retrieval.mode = KnowledgeSource::dataset;
    return c;
}

Outcome toy_separation() {
    const auto start = std::chrono::steady_clock::now();
    testing::TempDir dir("accept-toy");
    const ToyData toy = make_toy_data(ToyDataConfig{});
    write_toy_data(dir / "data", toy);
    const ExperimentConfig c = toy_recipe(dir / "data", dir / "runs");
    const PreparedData data = prepare_data(c);
    std::vector<ArmSpec> arms{baseline_arm(c), adapter_arm(c), arm_by_slug(c, "no-knowledge")};
    const RunManifest m = run_rows("acceptance", c, data, arms);
    const double base = m.row("baseline").aggregate.exact_match;
    const double malm = m.row("malm").aggregate.exact_match;
    const double no_k = m.row("no-knowledge").aggregate.exact_match;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass =
        malm - base >= kSeparationPoints && std::abs(no_k - base) <= kKnowledgeAblationBand && seconds < kToyBudgetSeconds;
    return {pass, fmt("EM adapter %.1f, baseline %.1f, w/o Knowledge %.1f; %.0f s", malm, base, no_k, seconds)};
}

Outcome bm25_oracle() {
    const std::vector<Document> fixture{{"1", "", "apple pie"}, {"2", "", "cherry tart"}};
    const InvertedIndex small = InvertedIndex::build(chunk_corpus(fixture));
    const std::vector<std::string> apple{"apple"};
    const double ln2 = bm25_score(apple, 0, small);
    if (std::abs(ln2 - std::log(2.0)) > kBm25FixtureTol) {
        return {false, "fixture score " + fmt("%.12f", ln2)};
    }

    Rng rng(606);
    const auto docs = testing::random_corpus(rng, 500, 120, 60);
    const auto passages = chunk_corpus(docs, 100);
    if (passages.size() != 500) {
        return {false, "corpus has " + std::to_string(passages.size()) + " passages"};
    }
    const InvertedIndex index = InvertedIndex::build(passages);
    const testing::BruteForce oracle(passages);
    for (int qi = 0; qi < 100; ++qi) {
        std::string query;
        for (std::size_t w = 0, n = 1 + rng.below(6); w < n; ++w) {
            query += " w" + std::to_string(rng.below(130));
        }
        const auto hits = retrieve_topk(query, index, passages.size());
        const auto want = oracle.rank(query);
        if (hits.size() != want.size()) {
            return {false, "query " + std::to_string(qi) + " returned " + std::to_string(hits.size())};
        }
        for (std::size_t r = 0; r < hits.size(); ++r) {
            if (hits[r].passage != want[r]) {
                return {false, "query '" + query + "' differs at rank " + std::to_string(r)};
            }
        }
    }
    return {true, "ln 2 fixture " + fmt("%.12f", ln2) + "; 100 queries ranked over 500 passages identical"};
}

Outcome topk_monotonicity() {
    const std::vector<std::size_t> ks{1, 5, 20, 50, 100};
    Rng rng(707);
    std::size_t corpora = 0;
    auto monotone = [&](const std::map<std::size_t, double>& acc) {
        for (std::size_t i = 1; i < ks.size(); ++i) {
            if (acc.at(ks[i - 1]) > acc.at(ks[i])) {
                return false;
            }
        }
        return true;
    };
    for (int trial = 0; trial < 20; ++trial) {
        const auto docs = testing::random_corpus(rng, 50 + rng.below(300), 40 + rng.below(100), 5 + rng.below(80));
        const InvertedIndex index = InvertedIndex::build(chunk_corpus(docs, 1 + rng.below(100)));
        std::vector<QueryAnswer> queries;
        for (int q = 0; q < 60; ++q) {
            queries.push_back({"w" + std::to_string(rng.below(60)) + " w" + std::to_string(rng.below(60)),
                               "w" + std::to_string(rng.below(60))});
        }
        if (!monotone(topk_accuracy(queries, index, ks))) {
            return {false, "random corpus " + std::to_string(trial)};
        }
        ++corpora;
    }
    const ToyData toy = make_toy_data(ToyDataConfig{});
    const InvertedIndex index = InvertedIndex::build(chunk_corpus(toy.corpus));
    std::vector<QueryAnswer> queries;
    for (const auto& r : toy.test) {
        queries.push_back({r.question, r.right_answer});
    }
    const auto acc = topk_accuracy(queries, index, ks);
    if (!monotone(acc)) {
        return {false, "toy corpus"};
    }
    return {true, std::to_string(corpora) + " random corpora plus the toy corpus (toy top-1 " +
                      fmt("%.1f%%", acc.at(1)) + ")"};
}

Outcome metric_fixtures() {
    const std::vector<Reference> refs{{"1", "the cat sat"}, {"2", "a b c"}, {"3", "The Wheel of Time."}};
    const std::vector<GeneratedText> hyps{{"1", "the cat"}, {"2", "a c b"}, {"3", "Wheel of Time"}};
    const MetricReport r = evaluate_outputs(hyps, refs);
    const std::pair<double, double> checks[] = {
        {r.rouge1, (80.0 + 100.0 + 600.0 / 7.0) / 3.0},
        {r.rouge2, (200.0 / 3.0 + 0.0 + 80.0) / 3.0},
        {r.rougeL, (80.0 + 200.0 / 3.0 + 600.0 / 7.0) / 3.0},
        {r.exact_match, 100.0 / 3.0},
        {r.bleu, 100.0 * std::exp(-0.25) * std::cbrt(1.0 * 0.6 * 0.5)},
        {r.brevity_penalty, std::exp(-0.25)},
    };
    double worst = 0.0;
    for (const auto& [got, want] : checks) {
        worst = std::max(worst, std::abs(got - want));
    }

    std::string hyp;
    std::string ref;
    for (int i = 0; i < 1151; ++i) {
        ref += " r" + std::to_string(i);
        if (i < 1000) {
            hyp += " r" + std::to_string(i);
        }
    }
    const std::vector<std::string> h{hyp};
    const std::vector<std::string> rr{ref};
    const double bp = bleu(h, rr).brevity_penalty;
    return {worst <= kMetricTol && std::abs(bp - 0.86) <= kBrevityTol,
            "fixture max abs err " + fmt("%.1e", worst) + "; BP " + fmt("%.4f", bp) + " for 1000 vs 1151 tokens"};
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    testing::TempDir dir("accept-det");
    ToyDataConfig tc;
    tc.train = 60;
    tc.test = 20;
    write_toy_data(dir / "data", make_toy_data(tc));
    ExperimentConfig c = toy_recipe(dir / "data", dir / "a");
    c.pretrain.steps = 150;
    c.train.epochs = 3;
    c.seeds = {7, 8};
    c.decoding.mode = DecodingMode::top_k;
    const RunManifest a = run_compare(c);
    c.output_dir = dir / "b";
    const RunManifest b = run_compare(c);
    std::size_t files = 0;
    double worst = 0.0;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        for (std::size_t s = 0; s < a.rows[r].seeds.size(); ++s) {
            const SeedRun& x = a.rows[r].seeds[s];
            const SeedRun& y = b.rows[r].seeds[s];
            if (slurp(x.generations) != slurp(y.generations) || slurp(x.checkpoint) != slurp(y.checkpoint)) {
                return {false, a.rows[r].arm.label + " seed " + std::to_string(x.seed) + " differs"};
            }
            ++files;
            for (auto [p, q] : {std::pair{x.report.rouge1, y.report.rouge1},
                                {x.report.rouge2, y.report.rouge2},
                                {x.report.rougeL, y.report.rougeL},
                                {x.report.exact_match, y.report.exact_match},
                                {x.report.bleu, y.report.bleu}}) {
                worst = std::max(worst, std::abs(p - q));
            }
        }
    }
    if (a.foundation_digest == b.foundation_digest && worst <= kDeterminismTol) {
        return {true, std::to_string(files) + " arm/seed runs (sampled decoding) reproduced byte for byte"};
    }
    return {false, "metric drift " + fmt("%.2e", worst)};
}

}  // namespace
}  // namespace malm

int main(int argc, char** argv) {
    using malm::Outcome;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"reduction_identity", malm::reduction_identity},
        {"gradient_correctness", malm::gradient_correctness},
        {"adjacency_structure", malm::adjacency_structure},
        {"attention_normalisation_permutation", malm::attention_normalisation},
        {"toy_task_separation", malm::toy_separation},
        {"bm25_oracle", malm::bm25_oracle},
        {"topk_accuracy_monotonicity", malm::topk_monotonicity},
        {"metric_fixtures", malm::metric_fixtures},
        {"determinism", malm::determinism},
    };
    std::vector<std::string> only(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) {
            continue;
        }
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s  %-36s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
