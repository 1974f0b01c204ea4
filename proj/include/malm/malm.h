// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// C interface to the MALM library.
//
// Every fallible call returns a malm_status. On failure the message is kept
// per thread and read back with malm_last_error(). Strings handed out through
// `char**` parameters are owned by the caller and released with
// malm_string_free(). Handles are opaque and released with their *_free call;
// passing NULL to a free function is a no-op.
//
// A model handle may be shared by threads for generation; training and saving
// need exclusive access.

#ifndef MALM_MALM_H
#define MALM_MALM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MALM_API __declspec(dllexport)
#else
#define MALM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum malm_status {
    MALM_OK = 0,
    MALM_ERR_INVALID_ARGUMENT = 1,
    MALM_ERR_IO = 2,
    MALM_ERR_PARSE = 3,
    MALM_ERR_SCHEMA = 4,
    MALM_ERR_DIMENSION = 5,
    MALM_ERR_NUMERIC = 6,
    MALM_ERR_CONFIG = 7,
    MALM_ERR_RETRIEVAL = 8,
    MALM_ERR_ALIGNMENT = 9,
    MALM_ERR_STRUCTURAL = 10,
    MALM_ERR_LENGTH = 11,
    MALM_ERR_INTERNAL = 99
} malm_status;

typedef struct malm_vocab malm_vocab;
typedef struct malm_model malm_model;
typedef struct malm_index malm_index;

/// Receives progress lines from long-running calls.
typedef void (*malm_progress_fn)(const char* message, void* user_data);

MALM_API const char* malm_version(void);
MALM_API const char* malm_status_name(malm_status status);
/// Message of the last failed call on this thread; "" if none.
MALM_API const char* malm_last_error(void);
MALM_API void malm_string_free(char* s);
/// Process-wide; NULL disables progress output.
MALM_API void malm_set_progress(malm_progress_fn fn, void* user_data);

/* Vocabulary ------------------------------------------------------------- */

/// Builds from the question, knowledge and answer fields of a JSONL dataset.
MALM_API malm_status malm_vocab_build(const char* dataset_path, size_t max_size, malm_vocab** out);
MALM_API malm_status malm_vocab_load(const char* path, malm_vocab** out);
MALM_API malm_status malm_vocab_save(const malm_vocab* vocab, const char* path);
MALM_API size_t malm_vocab_size(const malm_vocab* vocab);
MALM_API void malm_vocab_free(malm_vocab* vocab);

/* Model ------------------------------------------------------------------ */

MALM_API malm_status malm_model_load(const char* path, malm_model** out);
/// Foundation (and low-rank deltas) from one file, adapter from another.
MALM_API malm_status malm_model_load_split(const char* foundation_path, const char* adapter_path, malm_model** out);
MALM_API malm_status malm_model_save(const malm_model* model, const char* path);
/// JSON with the foundation and adapter configs and parameter counts.
MALM_API malm_status malm_model_info(const malm_model* model, char** json_out);
/// `decoding_json` may be NULL (greedy) or {"mode","top_k","seed","max_len"}.
/// `knowledge` may be NULL or empty.
MALM_API malm_status malm_model_generate(const malm_model* model, const malm_vocab* vocab, const char* question,
                                         const char* knowledge, const char* decoding_json, char** text_out);
MALM_API void malm_model_free(malm_model* model);

/* Retrieval -------------------------------------------------------------- */

/// Chunks a JSONL corpus ({"id","title","text"} per line) into `window`-word
/// passages and indexes them for BM25.
MALM_API malm_status malm_index_build(const char* corpus_path, size_t window, malm_index** out);
MALM_API malm_status malm_index_load(const char* path, malm_index** out);
MALM_API malm_status malm_index_save(const malm_index* index, const char* path);
MALM_API size_t malm_index_passage_count(const malm_index* index);
/// JSON array of {"passage","doc_id","score","text"}, best first.
MALM_API malm_status malm_index_retrieve(const malm_index* index, const char* query, size_t k, char** json_out);
/// JSON object k -> percent of dataset questions whose answer appears in the
/// top-k passages.
MALM_API malm_status malm_index_accuracy(const malm_index* index, const char* dataset_path, const size_t* ks,
                                         size_t n_ks, char** json_out);
MALM_API void malm_index_free(malm_index* index);

/* Pipelines (JSON in, JSON out) ------------------------------------------ */

/// Writes train.jsonl, test.jsonl and corpus.jsonl under request
/// "output_dir"; any other request keys override the toy data settings.
MALM_API malm_status malm_make_toy_data(const char* request_json, char** result_json);
/// {"config": ini path, "output_dir"?}: pretrains the foundation described by
/// the config and writes foundation.ckpt and vocab.txt.
MALM_API malm_status malm_pretrain(const char* request_json, char** result_json);
/// {"config", "arm", "seed", "output_dir", "foundation"?, "vocab"?}: trains
/// one arm and writes model.ckpt and train_log.jsonl. "foundation" and
/// "vocab" override the config's checkpoint and vocabulary paths.
MALM_API malm_status malm_train(const char* request_json, char** result_json);
/// {"model", "vocab", "data", "output", "decoding"?, "knowledge_max_tokens"?,
/// "seed"?}: decodes every record of a dataset into a generations file.
MALM_API malm_status malm_generate(const char* request_json, char** result_json);
/// Scores a generations file against a dataset's answers; returns the report.
MALM_API malm_status malm_evaluate(const char* generations_path, const char* dataset_path, int with_samples,
                                   char** report_json);
/// kind: "compare", "ablation", "layer_sweep" or "rag". `options_json` may be
/// NULL or {"layers": [...], "output_dir": ...}. Returns the run manifest with
/// a "table" string added.
MALM_API malm_status malm_run_experiment(const char* kind, const char* config_path, const char* options_json,
                                         char** manifest_json);

#ifdef __cplusplus
}
#endif

#endif  // MALM_MALM_H
