// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "lm/foundation.hpp"

#include <cmath>

#include "common/error.hpp"

namespace malm {
namespace {

std::string block_name(std::size_t b, const char* leaf) { return "blocks." + std::to_string(b) + "." + leaf; }

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct ShapeSpec {
    std::string name;
    std::size_t rows;
    std::size_t cols;
};

std::vector<ShapeSpec> expected_shapes(const FoundationConfig& c) {
    std::vector<ShapeSpec> out;
    out.push_back({"tok_emb", c.vocab_size, c.width});
    out.push_back({"pos_emb", c.max_seq_len, c.width});
    for (std::size_t b = 0; b < c.blocks; ++b) {
        out.push_back({block_name(b, "ln1.gain"), 1, c.width});
        out.push_back({block_name(b, "ln1.bias"), 1, c.width});
        out.push_back({block_name(b, "attn.wq"), c.width, c.width});
        out.push_back({block_name(b, "attn.wk"), c.width, c.width});
        out.push_back({block_name(b, "attn.wv"), c.width, c.width});
        out.push_back({block_name(b, "attn.wo"), c.width, c.width});
        out.push_back({block_name(b, "ln2.gain"), 1, c.width});
        out.push_back({block_name(b, "ln2.bias"), 1, c.width});
        out.push_back({block_name(b, "ffn.w1"), c.width, c.ffn_width});
        out.push_back({block_name(b, "ffn.b1"), 1, c.ffn_width});
        out.push_back({block_name(b, "ffn.w2"), c.ffn_width, c.width});
        out.push_back({block_name(b, "ffn.b2"), 1, c.width});
    }
    out.push_back({"ln_f.gain", 1, c.width});
    out.push_back({"ln_f.bias", 1, c.width});
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void FoundationConfig::validate() const {
    if (vocab_size <= text::Vocabulary::reserved) {
        fail(ErrorKind::config, "foundation: vocab_size must exceed the reserved ids");
    }
    if (width == 0 || heads == 0 || width % heads != 0) {
        fail(ErrorKind::config, "foundation: width " + std::to_string(width) + " not divisible by heads " +
                                    std::to_string(heads));
    }
    if (blocks == 0 || ffn_width == 0 || max_seq_len == 0) {
        fail(ErrorKind::config, "foundation: blocks, ffn_width and max_seq_len must be positive");
    }
    if (positional != "learned") {
        fail(ErrorKind::config, "foundation: unsupported positional encoding '" + positional + "'");
    }
}

nlohmann::json FoundationConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"width", width},           {"blocks", blocks},
            {"heads", heads},           {"ffn_width", ffn_width},   {"max_seq_len", max_seq_len},
            {"positional", positional}};
}

FoundationConfig FoundationConfig::from_json(const nlohmann::json& j) {
    FoundationConfig c;
    try {
        c.vocab_size = j.at("vocab_size").get<std::size_t>();
        c.width = j.at("width").get<std::size_t>();
        c.blocks = j.at("blocks").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.ffn_width = j.at("ffn_width").get<std::size_t>();
        c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
        c.positional = j.value("positional", std::string("learned"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema, std::string("foundation config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

void ParameterSet::add(std::string name, Tensor tensor) {
    if (index_.count(name)) {
        fail(ErrorKind::invalid_argument, "duplicate parameter '" + name + "'");
    }
    names_.push_back(name);
    index_.emplace(std::move(name), std::move(tensor));
}

const Tensor& ParameterSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        fail(ErrorKind::config, "unknown parameter '" + name + "'");
    }
    return it->second;
}

Tensor& ParameterSet::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        fail(ErrorKind::config, "unknown parameter '" + name + "'");
    }
    return it->second;
}

std::vector<Tensor> ParameterSet::tensors() const {
    std::vector<Tensor> out;
    for (const auto& n : names_) {
        out.push_back(index_.at(n));
    }
    return out;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : index_) {
        n += t.size();
    }
    return n;
}

void ParameterSet::set_requires_grad(bool flag) {
    for (auto& [name, t] : index_) {
        t.set_requires_grad(flag);
    }
}

void ParameterSet::zero_grad() {
    for (auto& [name, t] : index_) {
        t.zero_grad();
    }
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& n : names_) {
        const Tensor& t = index_.at(n);
        out.add(n, t.clone(t.requires_grad()));
    }
    return out;
}

std::vector<Tensor> LoraSet::trainables() const {
    std::vector<Tensor> out;
    for (const auto& [name, d] : deltas) {
        out.push_back(d.a);
        out.push_back(d.b);
    }
    return out;
}

std::size_t LoraSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, d] : deltas) {
        n += d.a.size() + d.b.size();
    }
    return n;
}

LoraSet LoraSet::clone() const {
    LoraSet out;
    out.rank = rank;
    out.scaling = scaling;
    for (const auto& [name, d] : deltas) {
        out.deltas.emplace(name, LowRankDelta{d.a.clone(d.a.requires_grad()), d.b.clone(d.b.requires_grad())});
    }
    return out;
}

// ---------------------------------------------------------------------------

Foundation::Foundation(FoundationConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    const auto& c = config_;
    const double std_dev = 0.02;
    const double resid_std = std_dev / std::sqrt(2.0 * static_cast<double>(c.blocks));
    for (const ShapeSpec& s : expected_shapes(c)) {
        Tensor t;
        if (ends_with(s.name, ".gain")) {
            t = Tensor::filled(s.rows, s.cols, 1.0);
        } else if (ends_with(s.name, ".bias") || ends_with(s.name, ".b1") || ends_with(s.name, ".b2")) {
            t = Tensor::zeros(s.rows, s.cols);
        } else if (ends_with(s.name, "attn.wo") || ends_with(s.name, "ffn.w2")) {
            t = Tensor::randn(s.rows, s.cols, resid_std, rng);
        } else {
            t = Tensor::randn(s.rows, s.cols, std_dev, rng);
        }
        t.set_requires_grad(true);
        params_.add(s.name, std::move(t));
    }
}

Foundation::Foundation(FoundationConfig config, ParameterSet params) : config_(std::move(config)) {
    config_.validate();
    for (const ShapeSpec& s : expected_shapes(config_)) {
        const Tensor& t = params.get(s.name);
        if (t.rows() != s.rows || t.cols() != s.cols) {
            fail(ErrorKind::dimension, "foundation parameter '" + s.name + "' has shape " + t.shape_string());
        }
    }
    params_ = std::move(params);
}

Tensor Foundation::linear(const Tensor& x, const std::string& name, const LoraSet* lora) const {
    Tensor y = matmul(x, params_.get(name));
    if (lora != nullptr) {
        auto it = lora->deltas.find(name);
        if (it != lora->deltas.end()) {
            Tensor low = matmul(matmul(x, it->second.a), it->second.b);
            y = add(y, scale(low, lora->scaling));
        }
    }
    return y;
}

Tensor Foundation::hidden_states(std::span<const TokenId> tokens, const LoraSet* lora) const {
    const auto& c = config_;
    const std::size_t n = tokens.size();
    if (n > c.max_seq_len) {
        fail(ErrorKind::length, "sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                                    std::to_string(c.max_seq_len));
    }
    if (n == 0) {
        return Tensor::zeros(0, c.width);
    }
    std::vector<TokenId> positions(n);
    for (std::size_t i = 0; i < n; ++i) {
        positions[i] = static_cast<TokenId>(i);
    }
    Tensor x = add(embedding(params_.get("tok_emb"), tokens), embedding(params_.get("pos_emb"), positions));

    Mask causal(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            causal[i * n + j] = 1;
        }
    }
    const std::size_t head_width = c.width / c.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

    for (std::size_t b = 0; b < c.blocks; ++b) {
        Tensor h = layer_norm(x, params_.get(block_name(b, "ln1.gain")), params_.get(block_name(b, "ln1.bias")));
        Tensor q = linear(h, block_name(b, "attn.wq"), lora);
        Tensor k = linear(h, block_name(b, "attn.wk"), lora);
        Tensor v = linear(h, block_name(b, "attn.wv"), lora);
        std::vector<Tensor> heads;
        heads.reserve(c.heads);
        for (std::size_t hd = 0; hd < c.heads; ++hd) {
            Tensor qh = slice_cols(q, hd * head_width, head_width);
            Tensor kh = slice_cols(k, hd * head_width, head_width);
            Tensor vh = slice_cols(v, hd * head_width, head_width);
            Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), causal);
            heads.push_back(matmul(attn, vh));
        }
        x = add(x, linear(concat_cols(heads), block_name(b, "attn.wo"), lora));

        Tensor h2 = layer_norm(x, params_.get(block_name(b, "ln2.gain")), params_.get(block_name(b, "ln2.bias")));
        Tensor f = gelu(add_row(linear(h2, block_name(b, "ffn.w1"), lora), params_.get(block_name(b, "ffn.b1"))));
        x = add(x, add_row(linear(f, block_name(b, "ffn.w2"), lora), params_.get(block_name(b, "ffn.b2"))));
    }
    return layer_norm(x, params_.get("ln_f.gain"), params_.get("ln_f.bias"));
}

StreamOutput Foundation::forward_stream(std::span<const TokenId> tokens, const LoraSet* lora) const {
    Tensor hidden = hidden_states(tokens, lora);
    if (hidden.rows() == 0) {
        return {hidden, Tensor::zeros(0, config_.vocab_size)};
    }
    Tensor logits = matmul_nt(hidden, output_head());
    return {hidden, logits};
}

Tensor Foundation::encode_knowledge(std::span<const TokenId> tokens, const LoraSet* lora) const {
    return hidden_states(tokens, lora);
}

Foundation Foundation::clone() const { return Foundation(config_, params_.clone()); }

CheckpointSection Foundation::to_section() const {
    CheckpointSection s;
    s.config = config_.to_json();
    for (const auto& name : params_.names()) {
        s.arrays.push_back(to_array(name, params_.get(name)));
    }
    return s;
}

Foundation Foundation::from_section(const CheckpointSection& section) {
    FoundationConfig config = FoundationConfig::from_json(section.config);
    ParameterSet params;
    for (const ShapeSpec& s : expected_shapes(config)) {
        params.add(s.name, from_array(section.array(s.name), s.rows, s.cols, true));
    }
    if (section.arrays.size() != params.names().size()) {
        fail(ErrorKind::schema, "foundation section holds arrays the config does not describe");
    }
    return Foundation(std::move(config), std::move(params));
}

void Foundation::save(const std::filesystem::path& path, const LoraSet* lora) const {
    Checkpoint ckpt;
    ckpt.sections.emplace("foundation", to_section());
    if (lora != nullptr && !lora->deltas.empty()) {
        ckpt.sections.emplace("lora", lora_to_section(*lora));
    }
    write_checkpoint(path, ckpt);
}

// ---------------------------------------------------------------------------

std::vector<std::string> lora_target_names(const FoundationConfig& config) {
    std::vector<std::string> out;
    for (std::size_t b = 0; b < config.blocks; ++b) {
        for (const char* leaf : {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "ffn.w1", "ffn.w2"}) {
            out.push_back(block_name(b, leaf));
        }
    }
    return out;
}

LoraSet apply_lora(Foundation& foundation, std::span<const std::string> targets, std::size_t rank, double scaling,
                   Rng& rng) {
    if (rank == 0) {
        fail(ErrorKind::config, "lora: rank must be >= 1");
    }
    const auto candidates = lora_target_names(foundation.config());
    LoraSet lora;
    lora.rank = rank;
    lora.scaling = scaling;
    for (const std::string& target : targets) {
        bool matched = false;
        for (const std::string& name : candidates) {
            if (name == target || ends_with(name, "." + target)) {
                matched = true;
                if (lora.deltas.count(name)) {
                    continue;
                }
                const Tensor& w = foundation.params().get(name);
                LowRankDelta d;
                d.a = Tensor::randn(w.rows(), rank, 1.0 / static_cast<double>(w.rows()), rng, true);
                d.b = Tensor::zeros(rank, w.cols(), true);
                lora.deltas.emplace(name, std::move(d));
            }
        }
        if (!matched) {
            fail(ErrorKind::config, "lora: unknown target matrix '" + target + "'");
        }
    }
    foundation.params().set_requires_grad(false);
    return lora;
}

CheckpointSection lora_to_section(const LoraSet& lora) {
    CheckpointSection s;
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& [name, d] : lora.deltas) {
        targets.push_back(name);
        s.arrays.push_back(to_array(name + ".A", d.a));
        s.arrays.push_back(to_array(name + ".B", d.b));
    }
    s.config = {{"rank", lora.rank}, {"scaling", lora.scaling}, {"targets", targets}};
    return s;
}

LoraSet lora_from_section(const CheckpointSection& section, const Foundation& foundation) {
    LoraSet lora;
    try {
        lora.rank = section.config.at("rank").get<std::size_t>();
        lora.scaling = section.config.at("scaling").get<double>();
        for (const auto& t : section.config.at("targets")) {
            const std::string name = t.get<std::string>();
            const Tensor& w = foundation.params().get(name);
            LowRankDelta d;
            d.a = from_array(section.array(name + ".A"), w.rows(), lora.rank, true);
            d.b = from_array(section.array(name + ".B"), lora.rank, w.cols(), true);
            lora.deltas.emplace(name, std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema, std::string("lora section: ") + e.what());
    }
    return lora;
}

std::vector<TokenId> question_stream(std::span<const TokenId> question, std::span<const TokenId> answer_prefix) {
    std::vector<TokenId> seq(question.begin(), question.end());
    seq.push_back(text::Vocabulary::bos);
    seq.insert(seq.end(), answer_prefix.begin(), answer_prefix.end());
    return seq;
}

}  // namespace malm
