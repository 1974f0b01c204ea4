// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C interface. Results go to stdout as JSON;
// tables and progress go to stderr.

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "malm/malm.h"

namespace {

using nlohmann::json;

struct Failure {
    malm_status status;
};

void check(malm_status status) {
    if (status != MALM_OK) {
        std::cerr << "error (" << malm_status_name(status) << "): " << malm_last_error() << '\n';
        throw Failure{status};
    }
}

json take(char* text) {
    json j = json::parse(text);
    malm_string_free(text);
    return j;
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string fixed(double v, int digits = 2) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

void print_pairs(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t width = 0;
    for (const auto& [k, v] : rows) {
        width = std::max(width, k.size());
    }
    for (const auto& [k, v] : rows) {
        std::cerr << std::left << std::setw(static_cast<int>(width) + 2) << k << v << '\n';
    }
}

void print_report(const std::string& system, const json& r) {
    std::cerr << std::left << std::setw(14) << "System" << std::right << std::setw(10) << "ROUGE-1" << std::setw(10)
              << "ROUGE-2" << std::setw(10) << "ROUGE-L" << std::setw(13) << "Exact Match" << std::setw(10) << "BLEU"
              << std::setw(8) << "BP" << '\n';
    std::cerr << std::left << std::setw(14) << system << std::right << std::setw(10) << fixed(r["rouge1"])
              << std::setw(10) << fixed(r["rouge2"]) << std::setw(10) << fixed(r["rougeL"]) << std::setw(13)
              << fixed(r["exact_match"]) << std::setw(10) << fixed(r["bleu"]) << std::setw(8)
              << fixed(r["brevity_penalty"], 3) << '\n';
}

void print_accuracy(const json& acc) {
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& [k, v] : acc.items()) {
        rows.emplace_back("top-" + k, fixed(v.get<double>()) + "%");
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::stoul(a.first.substr(4)) < std::stoul(b.first.substr(4));
    });
    print_pairs(rows);
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(std::stoul(item));
        }
    }
    return out;
}

void run_experiment(const std::string& kind, const std::string& config, const std::string& out_dir,
                    const std::optional<std::string>& layers) {
    json opts = json::object();
    if (!out_dir.empty()) {
        opts["output_dir"] = out_dir;
    }
    if (layers) {
        opts["layers"] = parse_sizes(*layers);
    }
    char* text = nullptr;
    check(malm_run_experiment(kind.c_str(), config.c_str(), opts.dump().c_str(), &text));
    json m = take(text);
    std::cerr << m["table"].get<std::string>();
    if (m["extras"].contains("topk_accuracy")) {
        std::cerr << "\nretrieval accuracy\n";
        print_accuracy(m["extras"]["topk_accuracy"]);
        const auto& empty = m["extras"]["empty_retrievals"];
        std::cerr << "questions without retrieved knowledge: train " << empty["train"] << ", test " << empty["test"]
                  << '\n';
    }
    std::cerr << "manifest: " << m["manifest_path"].get<std::string>() << '\n';
    m.erase("table");
    emit(m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MALM: graph-attention knowledge adapter for a toy decoder LM"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    // make-toy-data
    auto* toy = app.add_subcommand("make-toy-data", "Write the synthetic lookup dataset and its corpus");
    std::string toy_out;
    std::size_t toy_train = 500, toy_test = 100, toy_first = 40, toy_second = 40, toy_codes = 100, toy_distract = 0;
    std::uint64_t toy_seed = 13;
    toy->add_option("-o,--out", toy_out, "Output directory")->required();
    toy->add_option("--train", toy_train, "Training records")->capture_default_str();
    toy->add_option("--test", toy_test, "Test records")->capture_default_str();
    toy->add_option("--first-words", toy_first, "First-name pool size")->capture_default_str();
    toy->add_option("--second-words", toy_second, "Second-name pool size")->capture_default_str();
    toy->add_option("--codes", toy_codes, "Answer code pool size")->capture_default_str();
    toy->add_option("--distractors", toy_distract, "Extra facts per knowledge field")->capture_default_str();
    toy->add_option("--seed", toy_seed, "Generator seed")->capture_default_str();

    // build-vocab
    auto* bv = app.add_subcommand("build-vocab", "Build a vocabulary from a JSONL dataset");
    std::string bv_data, bv_out;
    std::size_t bv_max = 32000;
    bv->add_option("-d,--data", bv_data, "Dataset (JSONL)")->required()->check(CLI::ExistingFile);
    bv->add_option("-o,--out", bv_out, "Vocabulary file")->required();
    bv->add_option("--max-size", bv_max, "Maximum vocabulary size")->capture_default_str();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Pretrain the foundation described by a config");
    std::string pre_config, pre_out;
    pre->add_option("-c,--config", pre_config, "Experiment config (INI)")->required();
    pre->add_option("-o,--out", pre_out, "Output directory (default: the config's)");

    // index
    auto* idx = app.add_subcommand("index", "Chunk a corpus and build a BM25 index");
    std::string idx_corpus, idx_out;
    std::size_t idx_window = 100;
    idx->add_option("--corpus", idx_corpus, "Corpus (JSONL with id, title, text)")->required();
    idx->add_option("-o,--out", idx_out, "Index file")->required();
    idx->add_option("--window", idx_window, "Words per passage")->capture_default_str();

    // retrieve
    auto* ret = app.add_subcommand("retrieve", "Query an index, or measure top-k accuracy over a dataset");
    std::string ret_index, ret_query, ret_data, ret_ks = "1,5,20,50,100";
    std::size_t ret_k = 5;
    ret->add_option("-i,--index", ret_index, "Index file")->required();
    auto* q_opt = ret->add_option("--query", ret_query, "Query text");
    auto* d_opt = ret->add_option("-d,--data", ret_data, "Dataset whose answers are checked");
    q_opt->excludes(d_opt);
    ret->add_option("-k,--k", ret_k, "Passages to return")->capture_default_str();
    ret->add_option("--ks", ret_ks, "Cut-offs for accuracy")->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "Train one arm for one seed");
    std::string tr_config, tr_arm = "malm", tr_out, tr_foundation, tr_vocab;
    std::optional<std::uint64_t> tr_seed;
    tr->add_option("-c,--config", tr_config, "Experiment config (INI)")->required();
    tr->add_option("--arm", tr_arm,
                   "baseline, malm, no-context, full-context, no-input, no-knowledge or layers-<L>")
        ->capture_default_str();
    tr->add_option("--seed", tr_seed, "Seed (default: first config seed)");
    tr->add_option("-o,--out", tr_out, "Output directory");
    tr->add_option("--foundation", tr_foundation, "Foundation checkpoint override");
    tr->add_option("--vocab", tr_vocab, "Vocabulary override");

    // generate
    auto* gen = app.add_subcommand("generate", "Decode one question or a whole dataset");
    std::string gen_model, gen_vocab, gen_question, gen_knowledge, gen_data, gen_out, gen_mode = "greedy";
    std::size_t gen_max_len = 16, gen_top_k = 5, gen_kmax = 128;
    std::uint64_t gen_seed = 0;
    gen->add_option("-m,--model", gen_model, "Model checkpoint")->required();
    gen->add_option("--vocab", gen_vocab, "Vocabulary file")->required();
    auto* gq = gen->add_option("--question", gen_question, "Question text");
    gen->add_option("--knowledge", gen_knowledge, "Knowledge text")->needs(gq);
    auto* gd = gen->add_option("-d,--data", gen_data, "Dataset (JSONL)");
    gen->add_option("-o,--out", gen_out, "Generations file (with --data)")->needs(gd);
    gq->excludes(gd);
    gen->add_option("--mode", gen_mode, "greedy or top_k")->capture_default_str();
    gen->add_option("--top-k", gen_top_k, "Candidates kept when sampling")->capture_default_str();
    gen->add_option("--max-len", gen_max_len, "Maximum answer tokens")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Sampling seed")->capture_default_str();
    gen->add_option("--knowledge-max-tokens", gen_kmax, "Knowledge token budget")->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a generations file against a dataset");
    std::string ev_gen, ev_data;
    bool ev_samples = false;
    ev->add_option("-g,--generations", ev_gen, "Generations (JSONL with id, output)")->required();
    ev->add_option("-d,--data", ev_data, "Reference dataset (JSONL)")->required();
    ev->add_flag("--samples", ev_samples, "Include per-sample scores");

    // experiments
    std::string exp_config, exp_out;
    std::optional<std::string> sweep_layers;
    auto add_experiment = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", exp_config, "Experiment config (INI)")->required();
        sub->add_option("-o,--out", exp_out, "Output directory override");
        return sub;
    };
    auto* cmp = add_experiment("compare", "Baseline (L=0 + LoRA) against the adapter");
    auto* abl = add_experiment("ablate", "Adapter and its four edge ablations");
    auto* sweep = add_experiment("layer-sweep", "One row per adapter depth");
    sweep->add_option("--layers", sweep_layers, "Depths, comma separated (default 0,1,2,3,4)");
    auto* rag = add_experiment("rag", "Compare with BM25-retrieved knowledge");

    CLI11_PARSE(app, argc, argv);

    if (!quiet) {
        malm_set_progress([](const char* message, void*) { std::cerr << message << '\n'; }, nullptr);
    }

    try {
        char* text = nullptr;
        if (toy->parsed()) {
            const json req = {{"output_dir", toy_out},       {"train", toy_train},   {"test", toy_test},
                              {"first_words", toy_first},    {"second_words", toy_second},
                              {"codes", toy_codes},          {"distractors", toy_distract}, {"seed", toy_seed}};
            check(malm_make_toy_data(req.dump().c_str(), &text));
            const json r = take(text);
            print_pairs({{"train", r["train"].get<std::string>()},
                         {"test", r["test"].get<std::string>()},
                         {"corpus", r["corpus"].get<std::string>()}});
            emit(r);
        } else if (bv->parsed()) {
            malm_vocab* vocab = nullptr;
            check(malm_vocab_build(bv_data.c_str(), bv_max, &vocab));
            const malm_status st = malm_vocab_save(vocab, bv_out.c_str());
            const std::size_t size = malm_vocab_size(vocab);
            malm_vocab_free(vocab);
            check(st);
            print_pairs({{"vocabulary", bv_out}, {"size", std::to_string(size)}});
            emit({{"vocab", bv_out}, {"size", size}});
        } else if (pre->parsed()) {
            json req = {{"config", pre_config}};
            if (!pre_out.empty()) {
                req["output_dir"] = pre_out;
            }
            check(malm_pretrain(req.dump().c_str(), &text));
            const json r = take(text);
            print_pairs({{"foundation", r["foundation"].get<std::string>()},
                         {"vocabulary", r["vocab"].get<std::string>()},
                         {"parameters", std::to_string(r["parameters"].get<std::size_t>())},
                         {"digest", r["digest"].get<std::string>()}});
            emit(r);
        } else if (idx->parsed()) {
            malm_index* index = nullptr;
            check(malm_index_build(idx_corpus.c_str(), idx_window, &index));
            const malm_status st = malm_index_save(index, idx_out.c_str());
            const std::size_t n = malm_index_passage_count(index);
            malm_index_free(index);
            check(st);
            print_pairs({{"index", idx_out}, {"passages", std::to_string(n)}});
            emit({{"index", idx_out}, {"passages", n}, {"window", idx_window}});
        } else if (ret->parsed()) {
            if (ret_query.empty() && ret_data.empty()) {
                std::cerr << "retrieve: give --query or --data\n";
                return MALM_ERR_INVALID_ARGUMENT;
            }
            malm_index* index = nullptr;
            check(malm_index_load(ret_index.c_str(), &index));
            malm_status st;
            if (!ret_data.empty()) {
                const auto ks = parse_sizes(ret_ks);
                st = malm_index_accuracy(index, ret_data.c_str(), ks.data(), ks.size(), &text);
            } else {
                st = malm_index_retrieve(index, ret_query.c_str(), ret_k, &text);
            }
            malm_index_free(index);
            check(st);
            const json r = take(text);
            if (!ret_data.empty()) {
                print_accuracy(r);
            } else {
                for (const auto& h : r) {
                    std::cerr << fixed(h["score"].get<double>(), 4) << "  [" << h["doc_id"].get<std::string>()
                              << "] " << h["text"].get<std::string>().substr(0, 70) << '\n';
                }
            }
            emit(r);
        } else if (tr->parsed()) {
            json req = {{"config", tr_config}, {"arm", tr_arm}};
            if (tr_seed) {
                req["seed"] = *tr_seed;
            }
            if (!tr_out.empty()) {
                req["output_dir"] = tr_out;
            }
            if (!tr_foundation.empty()) {
                req["foundation"] = tr_foundation;
            }
            if (!tr_vocab.empty()) {
                req["vocab"] = tr_vocab;
            }
            check(malm_train(req.dump().c_str(), &text));
            const json r = take(text);
            print_pairs({{"arm", r["arm"]["label"].get<std::string>()},
                         {"seed", std::to_string(r["seed"].get<std::uint64_t>())},
                         {"optimizer steps", std::to_string(r["optimizer_steps"].get<std::size_t>())},
                         {"final loss", fixed(r["final_loss"].get<double>(), 4)},
                         {"checkpoint", r["checkpoint"].get<std::string>()}});
            emit(r);
        } else if (gen->parsed()) {
            const json decoding = {{"mode", gen_mode}, {"top_k", gen_top_k}, {"max_len", gen_max_len},
                                   {"seed", gen_seed}};
            if (!gen_data.empty()) {
                if (gen_out.empty()) {
                    std::cerr << "generate: --data needs --out\n";
                    return MALM_ERR_INVALID_ARGUMENT;
                }
                const json req = {{"model", gen_model},   {"vocab", gen_vocab},           {"data", gen_data},
                                  {"output", gen_out},    {"decoding", decoding},         {"seed", gen_seed},
                                  {"knowledge_max_tokens", gen_kmax}};
                check(malm_generate(req.dump().c_str(), &text));
                const json r = take(text);
                print_pairs({{"generations", gen_out}, {"count", std::to_string(r["generations"].get<int>())}});
                emit(r);
            } else {
                if (gen_question.empty()) {
                    std::cerr << "generate: give --question or --data\n";
                    return MALM_ERR_INVALID_ARGUMENT;
                }
                malm_model* model = nullptr;
                malm_vocab* vocab = nullptr;
                check(malm_model_load(gen_model.c_str(), &model));
                malm_status st = malm_vocab_load(gen_vocab.c_str(), &vocab);
                if (st == MALM_OK) {
                    st = malm_model_generate(model, vocab, gen_question.c_str(), gen_knowledge.c_str(),
                                             decoding.dump().c_str(), &text);
                }
                malm_model_free(model);
                malm_vocab_free(vocab);
                check(st);
                const std::string answer = text;
                malm_string_free(text);
                std::cerr << answer << '\n';
                emit({{"question", gen_question}, {"output", answer}});
            }
        } else if (ev->parsed()) {
            check(malm_evaluate(ev_gen.c_str(), ev_data.c_str(), ev_samples ? 1 : 0, &text));
            const json r = take(text);
            print_report("run", r);
            emit(r);
        } else if (cmp->parsed()) {
            run_experiment("compare", exp_config, exp_out, std::nullopt);
        } else if (abl->parsed()) {
            run_experiment("ablation", exp_config, exp_out, std::nullopt);
        } else if (sweep->parsed()) {
            run_experiment("layer_sweep", exp_config, exp_out, sweep_layers);
        } else if (rag->parsed()) {
            run_experiment("rag", exp_config, exp_out, std::nullopt);
        }
    } catch (const Failure& f) {
        return static_cast<int>(f.status);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return MALM_ERR_INTERNAL;
    }
    return 0;
}
