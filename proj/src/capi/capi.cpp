// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "malm/malm.h"

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include <json.hpp>

#include "adapter/model.hpp"
#include "common/error.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/toy_data.hpp"
#include "metrics/metrics.hpp"
#include "retrieval/bm25.hpp"
#include "text/dataset.hpp"
#include "text/vocab.hpp"

struct malm_vocab {
    malm::text::Vocabulary vocab;
};

struct malm_model {
    malm::MalmModel model;
};

struct malm_index {
    malm::InvertedIndex index;
};

namespace {

using nlohmann::json;

thread_local std::string last_error;

std::mutex progress_mutex;
malm_progress_fn progress_fn = nullptr;
void* progress_user = nullptr;

malm::ProgressFn progress() {
    std::lock_guard lock(progress_mutex);
    if (progress_fn == nullptr) {
        return {};
    }
    return [fn = progress_fn, user = progress_user](const std::string& message) { fn(message.c_str(), user); };
}

malm_status status_of(malm::ErrorKind kind) {
    using malm::ErrorKind;
    switch (kind) {
        case ErrorKind::invalid_argument: return MALM_ERR_INVALID_ARGUMENT;
        case ErrorKind::io: return MALM_ERR_IO;
        case ErrorKind::parse: return MALM_ERR_PARSE;
        case ErrorKind::schema: return MALM_ERR_SCHEMA;
        case ErrorKind::dimension: return MALM_ERR_DIMENSION;
        case ErrorKind::numeric: return MALM_ERR_NUMERIC;
        case ErrorKind::config: return MALM_ERR_CONFIG;
        case ErrorKind::retrieval: return MALM_ERR_RETRIEVAL;
        case ErrorKind::alignment: return MALM_ERR_ALIGNMENT;
        case ErrorKind::structural: return MALM_ERR_STRUCTURAL;
        case ErrorKind::length: return MALM_ERR_LENGTH;
    }
    return MALM_ERR_INTERNAL;
}

template <typename Fn>
malm_status guarded(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return MALM_OK;
    } catch (const malm::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const json::exception& e) {
        last_error = std::string("json: ") + e.what();
        return MALM_ERR_SCHEMA;
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return MALM_ERR_IO;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return MALM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return MALM_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) {
        malm::fail(malm::ErrorKind::invalid_argument, std::string(what) + " must not be NULL");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json parse_request(const char* text) {
    require(text, "request");
    try {
        json j = json::parse(text);
        if (!j.is_object()) {
            malm::fail(malm::ErrorKind::schema, "request must be a JSON object");
        }
        return j;
    } catch (const json::parse_error& e) {
        malm::fail(malm::ErrorKind::parse, std::string("request: ") + e.what());
    }
}

malm::DecodingConfig decoding_from_json(const json& j) {
    malm::DecodingConfig d;
    if (j.is_null()) {
        return d;
    }
    const std::string mode = j.value("mode", std::string("greedy"));
    if (mode == "greedy") {
        d.mode = malm::DecodingMode::greedy;
    } else if (mode == "top_k") {
        d.mode = malm::DecodingMode::top_k;
    } else {
        malm::fail(malm::ErrorKind::config, "decoding mode must be greedy or top_k, got '" + mode + "'");
    }
    d.top_k = j.value("top_k", d.top_k);
    d.seed = j.value("seed", d.seed);
    d.max_len = j.value("max_len", d.max_len);
    return d;
}

std::vector<malm::Reference> references_of(const std::vector<malm::text::Record>& records) {
    std::vector<malm::Reference> refs;
    refs.reserve(records.size());
    for (const auto& r : records) {
        refs.push_back({r.id, r.right_answer});
    }
    return refs;
}

}  // namespace

extern "C" {

const char* malm_version(void) { return "0.1.0"; }

const char* malm_status_name(malm_status status) {
    switch (status) {
        case MALM_OK: return "ok";
        case MALM_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case MALM_ERR_IO: return "io";
        case MALM_ERR_PARSE: return "parse";
        case MALM_ERR_SCHEMA: return "schema";
        case MALM_ERR_DIMENSION: return "dimension";
        case MALM_ERR_NUMERIC: return "numeric";
        case MALM_ERR_CONFIG: return "config";
        case MALM_ERR_RETRIEVAL: return "retrieval";
        case MALM_ERR_ALIGNMENT: return "alignment";
        case MALM_ERR_STRUCTURAL: return "structural";
        case MALM_ERR_LENGTH: return "length";
        case MALM_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* malm_last_error(void) { return last_error.c_str(); }

void malm_string_free(char* s) { std::free(s); }

void malm_set_progress(malm_progress_fn fn, void* user_data) {
    std::lock_guard lock(progress_mutex);
    progress_fn = fn;
    progress_user = user_data;
}

// Vocabulary ---------------------------------------------------------------

malm_status malm_vocab_build(const char* dataset_path, size_t max_size, malm_vocab** out) {
    return guarded([&] {
        require(dataset_path, "dataset_path");
        require(out, "out");
        std::vector<std::string> lines;
        for (const auto& r : malm::text::read_records(dataset_path)) {
            lines.push_back(r.question);
            lines.push_back(r.knowledge);
            lines.push_back(r.right_answer);
        }
        *out = new malm_vocab{malm::text::Vocabulary::build(lines, max_size)};
    });
}

malm_status malm_vocab_load(const char* path, malm_vocab** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new malm_vocab{malm::text::Vocabulary::load(path)};
    });
}

malm_status malm_vocab_save(const malm_vocab* vocab, const char* path) {
    return guarded([&] {
        require(vocab, "vocab");
        require(path, "path");
        vocab->vocab.save(path);
    });
}

size_t malm_vocab_size(const malm_vocab* vocab) { return vocab == nullptr ? 0 : vocab->vocab.size(); }

void malm_vocab_free(malm_vocab* vocab) { delete vocab; }

// Model --------------------------------------------------------------------

malm_status malm_model_load(const char* path, malm_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new malm_model{malm::MalmModel::load(path)};
    });
}

malm_status malm_model_load_split(const char* foundation_path, const char* adapter_path, malm_model** out) {
    return guarded([&] {
        require(foundation_path, "foundation_path");
        require(adapter_path, "adapter_path");
        require(out, "out");
        *out = new malm_model{malm::MalmModel::load(foundation_path, adapter_path)};
    });
}

malm_status malm_model_save(const malm_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        model->model.save(path);
    });
}

malm_status malm_model_info(const malm_model* model, char** json_out) {
    return guarded([&] {
        require(model, "model");
        require(json_out, "json_out");
        const malm::MalmModel& m = model->model;
        json info = {{"foundation", m.foundation.config().to_json()},
                     {"adapter", m.adapter_config.to_json()},
                     {"foundation_parameters", m.foundation.params().scalar_count()},
                     {"adapter_parameters", m.adapter.scalar_count()},
                     {"lora_parameters", m.lora ? m.lora->scalar_count() : 0},
                     {"knowledge_uses_lora", m.knowledge_uses_lora}};
        if (m.lora) {
            info["lora"] = {{"rank", m.lora->rank}, {"scaling", m.lora->scaling}};
        }
        *json_out = dup_string(info.dump());
    });
}

malm_status malm_model_generate(const malm_model* model, const malm_vocab* vocab, const char* question,
                                const char* knowledge, const char* decoding_json, char** text_out) {
    return guarded([&] {
        require(model, "model");
        require(vocab, "vocab");
        require(question, "question");
        require(text_out, "text_out");
        const malm::DecodingConfig d =
            decoding_from_json(decoding_json == nullptr ? json() : parse_request(decoding_json));
        const auto q = vocab->vocab.encode(question);
        const auto k = vocab->vocab.encode(knowledge == nullptr ? "" : knowledge);
        const malm::Generation g = malm::generate(model->model, q, k, d);
        *text_out = dup_string(vocab->vocab.decode(g.tokens));
    });
}

void malm_model_free(malm_model* model) { delete model; }

// Retrieval ----------------------------------------------------------------

malm_status malm_index_build(const char* corpus_path, size_t window, malm_index** out) {
    return guarded([&] {
        require(corpus_path, "corpus_path");
        require(out, "out");
        const auto docs = malm::read_corpus(corpus_path);
        std::size_t skipped = 0;
        auto passages = malm::chunk_corpus(docs, window, &skipped);
        *out = new malm_index{malm::InvertedIndex::build(std::move(passages))};
        if (skipped > 0) {
            if (auto p = progress()) {
                p("skipped " + std::to_string(skipped) + " empty documents");
            }
        }
    });
}

malm_status malm_index_load(const char* path, malm_index** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new malm_index{malm::InvertedIndex::load(path)};
    });
}

malm_status malm_index_save(const malm_index* index, const char* path) {
    return guarded([&] {
        require(index, "index");
        require(path, "path");
        index->index.save(path);
    });
}

size_t malm_index_passage_count(const malm_index* index) {
    return index == nullptr ? 0 : index->index.passage_count();
}

malm_status malm_index_retrieve(const malm_index* index, const char* query, size_t k, char** json_out) {
    return guarded([&] {
        require(index, "index");
        require(query, "query");
        require(json_out, "json_out");
        json hits = json::array();
        for (const malm::Hit& h : malm::retrieve_topk(query, index->index, k)) {
            const malm::Passage& p = index->index.passage(h.passage);
            hits.push_back({{"passage", h.passage}, {"doc_id", p.doc_id}, {"score", h.score}, {"text", p.text}});
        }
        *json_out = dup_string(hits.dump());
    });
}

malm_status malm_index_accuracy(const malm_index* index, const char* dataset_path, const size_t* ks, size_t n_ks,
                                char** json_out) {
    return guarded([&] {
        require(index, "index");
        require(dataset_path, "dataset_path");
        require(ks, "ks");
        require(json_out, "json_out");
        std::vector<malm::QueryAnswer> queries;
        for (const auto& r : malm::text::read_records(dataset_path)) {
            queries.push_back({r.question, r.right_answer});
        }
        json out = json::object();
        for (const auto& [k, pct] : malm::topk_accuracy(queries, index->index, std::span<const size_t>(ks, n_ks))) {
            out[std::to_string(k)] = pct;
        }
        *json_out = dup_string(out.dump());
    });
}

void malm_index_free(malm_index* index) { delete index; }

// Pipelines ----------------------------------------------------------------

malm_status malm_make_toy_data(const char* request_json, char** result_json) {
    return guarded([&] {
        require(result_json, "result_json");
        json req = parse_request(request_json);
        const std::filesystem::path dir = req.at("output_dir").get<std::string>();
        req.erase("output_dir");
        json settings = malm::ToyDataConfig{}.to_json();
        settings.update(req);
        const malm::ToyDataConfig cfg = malm::ToyDataConfig::from_json(settings);
        const malm::ToyData data = malm::make_toy_data(cfg);
        malm::write_toy_data(dir, data);
        const json out = {{"train", (dir / "train.jsonl").string()},
                          {"test", (dir / "test.jsonl").string()},
                          {"corpus", (dir / "corpus.jsonl").string()},
                          {"train_records", data.train.size()},
                          {"test_records", data.test.size()},
                          {"documents", data.corpus.size()},
                          {"settings", cfg.to_json()}};
        *result_json = dup_string(out.dump());
    });
}

malm_status malm_pretrain(const char* request_json, char** result_json) {
    return guarded([&] {
        require(result_json, "result_json");
        const json req = parse_request(request_json);
        malm::ExperimentConfig c = malm::ExperimentConfig::load(req.at("config").get<std::string>());
        c.foundation_checkpoint.clear();
        if (req.contains("output_dir")) {
            c.output_dir = req.at("output_dir").get<std::string>();
        }
        const malm::PreparedData data = malm::prepare_data(c, progress());
        const auto dir = malm::resolve_output_dir(c.output_dir);
        const json out = {{"foundation", data.foundation_path.string()},
                          {"vocab", c.vocab_path.empty() ? (dir / "vocab.txt").string() : c.vocab_path.string()},
                          {"vocab_size", data.vocab.size()},
                          {"digest", data.foundation_digest},
                          {"architecture", data.foundation.config().to_json()},
                          {"parameters", data.foundation.params().scalar_count()}};
        *result_json = dup_string(out.dump());
    });
}

malm_status malm_train(const char* request_json, char** result_json) {
    return guarded([&] {
        require(result_json, "result_json");
        const json req = parse_request(request_json);
        malm::ExperimentConfig c = malm::ExperimentConfig::load(req.at("config").get<std::string>());
        if (req.contains("foundation")) {
            c.foundation_checkpoint = req.at("foundation").get<std::string>();
        }
        if (req.contains("vocab")) {
            c.vocab_path = req.at("vocab").get<std::string>();
        }
        const malm::ArmSpec arm = malm::arm_by_slug(c, req.value("arm", std::string("malm")));
        const std::uint64_t seed = req.value("seed", c.seeds.front());
        const std::filesystem::path dir = req.contains("output_dir")
                                              ? std::filesystem::path(req.at("output_dir").get<std::string>())
                                              : malm::resolve_output_dir(c.output_dir) / arm.slug /
                                                    ("seed-" + std::to_string(seed));
        const malm::PreparedData data = malm::prepare_data(c, progress());
        const malm::TrainedArm trained = malm::train_arm(c, data, arm, seed, dir);
        const json out = {{"arm", arm.to_json()},
                          {"seed", seed},
                          {"checkpoint", (dir / "model.ckpt").string()},
                          {"train_log", (dir / "train_log.jsonl").string()},
                          {"optimizer_steps", trained.optimizer_steps},
                          {"final_loss", trained.final_loss},
                          {"foundation_digest", data.foundation_digest}};
        *result_json = dup_string(out.dump());
    });
}

malm_status malm_generate(const char* request_json, char** result_json) {
    return guarded([&] {
        require(result_json, "result_json");
        const json req = parse_request(request_json);
        const malm::MalmModel model = malm::MalmModel::load(req.at("model").get<std::string>());
        const auto vocab = malm::text::Vocabulary::load(req.at("vocab").get<std::string>());
        const auto samples = malm::text::load_dataset(req.at("data").get<std::string>(), vocab);
        const malm::DecodingConfig d = decoding_from_json(req.value("decoding", json()));
        const auto outputs = malm::generate_outputs(model, vocab, samples, d, req.value("knowledge_max_tokens", 128),
                                                    req.value("seed", std::uint64_t{0}));
        const std::string path = req.at("output").get<std::string>();
        malm::write_generations(path, outputs);
        *result_json = dup_string(json{{"output", path}, {"generations", outputs.size()}}.dump());
    });
}

malm_status malm_evaluate(const char* generations_path, const char* dataset_path, int with_samples,
                          char** report_json) {
    return guarded([&] {
        require(generations_path, "generations_path");
        require(dataset_path, "dataset_path");
        require(report_json, "report_json");
        const auto refs = references_of(malm::text::read_records(dataset_path));
        const malm::MetricReport report = malm::evaluate_run(generations_path, refs);
        *report_json = dup_string(report.to_json(with_samples != 0).dump());
    });
}

malm_status malm_run_experiment(const char* kind, const char* config_path, const char* options_json,
                                char** manifest_json) {
    return guarded([&] {
        require(kind, "kind");
        require(config_path, "config_path");
        require(manifest_json, "manifest_json");
        const json options = options_json == nullptr ? json::object() : parse_request(options_json);
        malm::ExperimentConfig c = malm::ExperimentConfig::load(config_path);
        if (options.contains("output_dir")) {
            c.output_dir = options.at("output_dir").get<std::string>();
        }
        const std::string k = kind;
        const auto p = progress();
        malm::RunManifest m;
        if (k == "compare") {
            m = malm::run_compare(c, p);
        } else if (k == "ablation") {
            m = malm::run_ablation(c, p);
        } else if (k == "layer_sweep") {
            const auto layers = options.value("layers", std::vector<std::size_t>{0, 1, 2, 3, 4});
            m = malm::run_layer_sweep(c, layers, p);
        } else if (k == "rag") {
            m = malm::run_rag(c, p);
        } else {
            malm::fail(malm::ErrorKind::invalid_argument,
                       "unknown experiment kind '" + k + "' (compare, ablation, layer_sweep, rag)");
        }
        json out = m.to_json();
        out["table"] = m.table();
        out["manifest_path"] = (malm::resolve_output_dir(c.output_dir) / "manifest.json").string();
        *manifest_json = dup_string(out.dump());
    });
}

}  // extern "C"
