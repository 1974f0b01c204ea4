// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "adapter/model.hpp"

#include <algorithm>
#include <numeric>

#include "common/error.hpp"

namespace malm {
namespace {

TokenId pick_token(std::span<const double> logits, const DecodingConfig& decoding, Rng& rng) {
    if (decoding.mode == DecodingMode::greedy || decoding.top_k <= 1) {
        // first maximum wins ties
        return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(decoding.top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    std::vector<double> top(k);
    for (std::size_t i = 0; i < k; ++i) {
        top[i] = logits[order[i]];
    }
    const std::vector<double> probs = softmax_masked(top, {});
    double u = rng.uniform();
    for (std::size_t i = 0; i < k; ++i) {
        u -= probs[i];
        if (u < 0.0) {
            return static_cast<TokenId>(order[i]);
        }
    }
    return static_cast<TokenId>(order[k - 1]);
}

}  // namespace

MalmModel MalmModel::clone() const {
    MalmModel m;
    m.foundation = foundation.clone();
    if (lora) {
        m.lora = lora->clone();
    }
    m.adapter_config = adapter_config;
    m.adapter = adapter.clone();
    m.knowledge_uses_lora = knowledge_uses_lora;
    return m;
}

void MalmModel::save(const std::filesystem::path& path) const {
    Checkpoint ckpt;
    ckpt.sections.emplace("foundation", foundation.to_section());
    if (lora && !lora->deltas.empty()) {
        ckpt.sections.emplace("lora", lora_to_section(*lora));
    }
    CheckpointSection adapter_section = adapter.to_section(adapter_config);
    adapter_section.config["knowledge_uses_lora"] = knowledge_uses_lora;
    ckpt.sections.emplace("adapter", std::move(adapter_section));
    write_checkpoint(path, ckpt);
}

MalmModel MalmModel::load(const std::filesystem::path& path) { return load(path, path); }

MalmModel MalmModel::load(const std::filesystem::path& foundation_path, const std::filesystem::path& adapter_path) {
    MalmModel m;
    const Checkpoint base = read_checkpoint(foundation_path);
    m.foundation = Foundation::from_section(base.section("foundation"));
    const Checkpoint extra = adapter_path == foundation_path ? base : read_checkpoint(adapter_path);
    const Checkpoint& lora_src = extra.has_section("lora") ? extra : base;
    if (lora_src.has_section("lora")) {
        m.lora = lora_from_section(lora_src.section("lora"), m.foundation);
        m.foundation.params().set_requires_grad(false);
    }
    if (extra.has_section("adapter")) {
        const CheckpointSection& s = extra.section("adapter");
        m.adapter_config = AdapterConfig::from_json(s.config);
        m.adapter = AdapterParams::from_section(s, m.adapter_config);
        m.knowledge_uses_lora = s.config.value("knowledge_uses_lora", true);
        if (m.adapter_config.layers > 0 && m.adapter.width != m.foundation.config().width) {
            fail(ErrorKind::dimension, "adapter width " + std::to_string(m.adapter.width) +
                                           " does not match foundation width " +
                                           std::to_string(m.foundation.config().width));
        }
    } else {
        m.adapter_config.layers = 0;
        m.adapter.width = m.foundation.config().width;
    }
    return m;
}

StreamFeatures encode_streams(const MalmModel& model, std::span<const TokenId> question,
                              std::span<const TokenId> prefix, std::span<const TokenId> knowledge) {
    if (question.empty()) {
        fail(ErrorKind::structural, "encode_streams: empty question");
    }
    StreamFeatures f;
    f.question_len = question.size();
    const std::vector<TokenId> seq = question_stream(question, prefix);
    StreamOutput out = model.foundation.forward_stream(seq, model.question_lora());
    f.question_hidden = out.hidden;
    f.question_logits = out.logits;
    f.knowledge_hidden = model.foundation.encode_knowledge(knowledge, model.knowledge_lora());
    return f;
}

Tensor output_logits(const MalmModel& model, const StreamFeatures& features, Rng& rng, bool training) {
    const std::size_t m = features.question_len;
    const std::size_t c = features.question_hidden.rows() - m;
    if (model.adapter_config.layers == 0) {
        return slice_rows(features.question_logits, m, c);
    }
    Tensor inputs = slice_rows(features.question_hidden, 0, m);
    Tensor outputs = slice_rows(features.question_hidden, m, c);
    Tensor final_nodes = adapter_graph_forward(inputs, outputs, features.knowledge_hidden, model.adapter,
                                               model.adapter_config, rng, training);
    Tensor adapted = slice_rows(final_nodes, m, c);
    return blend_logits(adapted, outputs, model.foundation.output_head(), model.adapter_config.residual);
}

Generation generate(const MalmModel& model, std::span<const TokenId> question, std::span<const TokenId> knowledge,
                    const DecodingConfig& decoding) {
    if (decoding.max_len == 0) {
        fail(ErrorKind::invalid_argument, "generate: max_len must be >= 1");
    }
    Rng rng(decoding.seed);
    Rng graph_rng(0);  // inference: dropout disabled, never drawn from
    Generation gen;
    const Tensor knowledge_hidden = model.foundation.encode_knowledge(knowledge, model.knowledge_lora());
    const bool bypass = model.adapter_config.layers == 0;
    while (gen.tokens.size() < decoding.max_len) {
        const std::vector<TokenId> seq = question_stream(question, gen.tokens);
        StreamOutput stream = model.foundation.forward_stream(seq, model.question_lora());
        const std::size_t last = seq.size() - 1;
        Tensor logits;
        if (bypass) {
            logits = slice_rows(stream.logits, last, 1);
        } else {
            const std::size_t m = question.size();
            Tensor inputs = slice_rows(stream.hidden, 0, m);
            Tensor outputs = slice_rows(stream.hidden, m, seq.size() - m);
            Tensor adapted = adapter_forward(inputs, outputs, knowledge_hidden, model.adapter, model.adapter_config,
                                             graph_rng, false);
            logits = blend_logits(adapted, slice_rows(stream.hidden, last, 1), model.foundation.output_head(),
                                  model.adapter_config.residual);
        }
        const TokenId next = pick_token(logits.values(), decoding, rng);
        if (next == text::Vocabulary::eos) {
            return gen;
        }
        gen.tokens.push_back(next);
    }
    gen.truncated = true;
    return gen;
}

Generation generate_foundation_only(const Foundation& foundation, const LoraSet* lora,
                                    std::span<const TokenId> question, const DecodingConfig& decoding) {
    if (decoding.max_len == 0) {
        fail(ErrorKind::invalid_argument, "generate: max_len must be >= 1");
    }
    Rng rng(decoding.seed);
    Generation gen;
    while (gen.tokens.size() < decoding.max_len) {
        const std::vector<TokenId> seq = question_stream(question, gen.tokens);
        StreamOutput stream = foundation.forward_stream(seq, lora);
        const TokenId next = pick_token(stream.logits.values().subspan((seq.size() - 1) * stream.logits.cols()),
                                        decoding, rng);
        if (next == text::Vocabulary::eos) {
            return gen;
        }
        gen.tokens.push_back(next);
    }
    gen.truncated = true;
    return gen;
}

}  // namespace malm
