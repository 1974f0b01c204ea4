// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "harness/config.hpp"

#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "common/error.hpp"
#include "lm/checkpoint.hpp"

namespace malm {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

class Section {
public:
    Section(const pt::ptree& root, std::string name, std::set<std::string> allowed)
        : name_(std::move(name)), allowed_(std::move(allowed)) {
        if (auto child = root.get_child_optional(name_)) {
            tree_ = &*child;
            for (const auto& [key, value] : *tree_) {
                if (allowed_.count(key) == 0) {
                    fail(ErrorKind::config, "config: unknown key '" + key + "' in [" + name_ + "]");
                }
            }
        }
    }

    std::optional<std::string> raw(const std::string& key) const {
        if (tree_ == nullptr) {
            return std::nullopt;
        }
        if (auto v = tree_->get_optional<std::string>(key)) {
            return trim(*v);
        }
        return std::nullopt;
    }

    std::string str(const std::string& key, const std::string& fallback) const { return raw(key).value_or(fallback); }

    template <typename T>
    T num(const std::string& key, T fallback) const {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        try {
            std::size_t used = 0;
            T out;
            if constexpr (std::is_floating_point_v<T>) {
                out = static_cast<T>(std::stod(*v, &used));
            } else {
                if (!v->empty() && v->front() == '-') {
                    throw std::invalid_argument("negative");
                }
                out = static_cast<T>(std::stoull(*v, &used));
            }
            if (used != v->size()) {
                throw std::invalid_argument("trailing text");
            }
            return out;
        } catch (const std::exception&) {
            fail(ErrorKind::config, "config: [" + name_ + "] " + key + " = '" + *v + "' is not a valid number");
        }
    }

    bool flag(const std::string& key, bool fallback) const {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        if (*v == "true" || *v == "1" || *v == "yes") {
            return true;
        }
        if (*v == "false" || *v == "0" || *v == "no") {
            return false;
        }
        fail(ErrorKind::config, "config: [" + name_ + "] " + key + " must be true or false");
    }

    std::vector<std::string> list(const std::string& key, std::vector<std::string> fallback) const {
        auto v = raw(key);
        return v ? split_list(*v) : fallback;
    }

    template <typename T>
    std::vector<T> num_list(const std::string& key, std::vector<T> fallback) const {
        auto v = raw(key);
        if (!v) {
            return fallback;
        }
        std::vector<T> out;
        for (const std::string& item : split_list(*v)) {
            try {
                std::size_t used = 0;
                out.push_back(static_cast<T>(std::stoull(item, &used)));
                if (used != item.size()) {
                    throw std::invalid_argument("trailing");
                }
            } catch (const std::exception&) {
                fail(ErrorKind::config, "config: [" + name_ + "] " + key + " has a bad entry '" + item + "'");
            }
        }
        return out;
    }

private:
    std::string name_;
    std::set<std::string> allowed_;
    const pt::ptree* tree_ = nullptr;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

DecodingMode parse_decoding(const std::string& s) {
    if (s == "greedy") {
        return DecodingMode::greedy;
    }
    if (s == "top_k") {
        return DecodingMode::top_k;
    }
    fail(ErrorKind::config, "config: decoding mode must be greedy or top_k, got '" + s + "'");
}

KnowledgeSource parse_source(const std::string& s) {
    if (s == "dataset") {
        return KnowledgeSource::dataset;
    }
    if (s == "bm25") {
        return KnowledgeSource::bm25;
    }
    fail(ErrorKind::config, "config: retrieval mode must be dataset or bm25, got '" + s + "'");
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
    if (dir.is_absolute()) {
        return dir;
    }
    if (const char* root = std::getenv("MALM_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
        return std::filesystem::path(root) / dir;
    }
    return dir;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        fail(ErrorKind::io, "config file not found: " + path.string());
    }
    pt::ptree root;
    try {
        pt::read_ini(path.string(), root);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorKind::parse, std::string("config: ") + e.what());
    }
    const std::set<std::string> sections{"run",     "data",  "foundation", "lora",
                                         "adapter", "train", "decoding",   "retrieval"};
    for (const auto& [name, child] : root) {
        if (sections.count(name) == 0) {
            fail(ErrorKind::config, "config: unknown section [" + name + "]");
        }
    }
    const std::filesystem::path base = path.parent_path();
    ExperimentConfig c;

    Section run(root, "run", {"name", "output_dir", "seeds"});
    c.name = run.str("name", c.name);
    c.output_dir = run.str("output_dir", c.output_dir.string());
    c.seeds = run.num_list<std::uint64_t>("seeds", c.seeds);

    Section data(root, "data", {"train", "test", "vocab", "vocab_max_size"});
    c.train_path = resolve(base, data.str("train", ""));
    c.test_path = resolve(base, data.str("test", ""));
    c.vocab_path = resolve(base, data.str("vocab", ""));
    c.vocab_max_size = data.num("vocab_max_size", c.vocab_max_size);

    Section fd(root, "foundation",
               {"checkpoint", "width", "blocks", "heads", "ffn_width", "max_seq_len", "pretrain_steps",
                "pretrain_batch", "pretrain_lr", "pretrain_seed"});
    c.foundation_checkpoint = resolve(base, fd.str("checkpoint", ""));
    c.foundation.width = fd.num("width", c.foundation.width);
    c.foundation.blocks = fd.num("blocks", c.foundation.blocks);
    c.foundation.heads = fd.num("heads", c.foundation.heads);
    c.foundation.ffn_width = fd.num("ffn_width", c.foundation.ffn_width);
    c.foundation.max_seq_len = fd.num("max_seq_len", c.foundation.max_seq_len);
    c.pretrain.steps = fd.num("pretrain_steps", c.pretrain.steps);
    c.pretrain.batch_sequences = fd.num("pretrain_batch", c.pretrain.batch_sequences);
    c.pretrain.optimizer.lr = fd.num("pretrain_lr", c.pretrain.optimizer.lr);
    c.pretrain.seed = fd.num("pretrain_seed", c.pretrain.seed);

    Section lora(root, "lora", {"rank", "scaling", "targets", "joint_with_adapter"});
    c.lora.rank = lora.num("rank", c.lora.rank);
    c.lora.scaling = lora.num("scaling", c.lora.scaling);
    c.lora.targets = lora.list("targets", c.lora.targets);
    c.lora.joint_with_adapter = lora.flag("joint_with_adapter", c.lora.joint_with_adapter);

    Section ad(root, "adapter", {"layers", "heads", "residual", "dropout", "leaky_slope", "activation"});
    c.adapter.layers = ad.num("layers", c.adapter.layers);
    c.adapter.heads = ad.num("heads", c.adapter.heads);
    c.adapter.residual = ad.num("residual", c.adapter.residual);
    c.adapter.dropout = ad.num("dropout", c.adapter.dropout);
    c.adapter.leaky_slope = ad.num("leaky_slope", c.adapter.leaky_slope);
    c.adapter.activation = parse_activation(ad.str("activation", activation_name(c.adapter.activation)));

    Section tr(root, "train",
               {"lr", "beta1", "beta2", "eps", "weight_decay", "epochs", "batch_size", "accumulation",
                "knowledge_max_tokens"});
    c.train.optimizer.lr = tr.num("lr", c.train.optimizer.lr);
    c.train.optimizer.beta1 = tr.num("beta1", c.train.optimizer.beta1);
    c.train.optimizer.beta2 = tr.num("beta2", c.train.optimizer.beta2);
    c.train.optimizer.eps = tr.num("eps", c.train.optimizer.eps);
    c.train.optimizer.weight_decay = tr.num("weight_decay", c.train.optimizer.weight_decay);
    c.train.epochs = tr.num("epochs", c.train.epochs);
    c.train.batch_size = tr.num("batch_size", c.train.batch_size);
    c.train.accumulation = tr.num("accumulation", c.train.accumulation);
    c.train.knowledge_max_tokens = tr.num("knowledge_max_tokens", c.train.knowledge_max_tokens);

    Section dec(root, "decoding", {"mode", "top_k", "max_len"});
    c.decoding.mode = parse_decoding(dec.str("mode", "greedy"));
    c.decoding.top_k = dec.num("top_k", c.decoding.top_k);
    c.decoding.max_len = dec.num("max_len", c.decoding.max_len);

    Section ret(root, "retrieval", {"mode", "index", "k", "accuracy_ks"});
    c.retrieval.mode = parse_source(ret.str("mode", "dataset"));
    c.retrieval.index = resolve(base, ret.str("index", ""));
    c.retrieval.k = ret.num("k", c.retrieval.k);
    c.retrieval.accuracy_ks = ret.num_list<std::size_t>("accuracy_ks", c.retrieval.accuracy_ks);
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json f = foundation.to_json();
    f.erase("vocab_size");
    return {{"run", {{"name", name}, {"output_dir", output_dir.string()}, {"seeds", seeds}}},
            {"data",
             {{"train", train_path.string()},
              {"test", test_path.string()},
              {"vocab", vocab_path.string()},
              {"vocab_max_size", vocab_max_size}}},
            {"foundation",
             {{"checkpoint", foundation_checkpoint.string()},
              {"architecture", f},
              {"pretrain_steps", pretrain.steps},
              {"pretrain_batch", pretrain.batch_sequences},
              {"pretrain_lr", pretrain.optimizer.lr},
              {"pretrain_seed", pretrain.seed}}},
            {"lora",
             {{"rank", lora.rank},
              {"scaling", lora.scaling},
              {"targets", lora.targets},
              {"joint_with_adapter", lora.joint_with_adapter}}},
            {"adapter", adapter.to_json()},
            {"train", train.to_json()},
            {"decoding",
             {{"mode", decoding.mode == DecodingMode::greedy ? "greedy" : "top_k"},
              {"top_k", decoding.top_k},
              {"max_len", decoding.max_len}}},
            {"retrieval",
             {{"mode", retrieval.mode == KnowledgeSource::dataset ? "dataset" : "bm25"},
              {"index", retrieval.index.string()},
              {"k", retrieval.k},
              {"accuracy_ks", retrieval.accuracy_ks}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    try {
        return from_json_unchecked(j);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema, std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::from_json_unchecked(const nlohmann::json& j) {
    ExperimentConfig c;
    const auto& run = j.at("run");
    c.name = run.value("name", c.name);
    c.output_dir = run.value("output_dir", c.output_dir.string());
    c.seeds = run.value("seeds", c.seeds);
    const auto& data = j.at("data");
    c.train_path = data.value("train", std::string{});
    c.test_path = data.value("test", std::string{});
    c.vocab_path = data.value("vocab", std::string{});
    c.vocab_max_size = data.value("vocab_max_size", c.vocab_max_size);
    const auto& fd = j.at("foundation");
    c.foundation_checkpoint = fd.value("checkpoint", std::string{});
    const auto& arch = fd.at("architecture");
    c.foundation.width = arch.value("width", c.foundation.width);
    c.foundation.blocks = arch.value("blocks", c.foundation.blocks);
    c.foundation.heads = arch.value("heads", c.foundation.heads);
    c.foundation.ffn_width = arch.value("ffn_width", c.foundation.ffn_width);
    c.foundation.max_seq_len = arch.value("max_seq_len", c.foundation.max_seq_len);
    c.pretrain.steps = fd.value("pretrain_steps", c.pretrain.steps);
    c.pretrain.batch_sequences = fd.value("pretrain_batch", c.pretrain.batch_sequences);
    c.pretrain.optimizer.lr = fd.value("pretrain_lr", c.pretrain.optimizer.lr);
    c.pretrain.seed = fd.value("pretrain_seed", c.pretrain.seed);
    const auto& lora = j.at("lora");
    c.lora.rank = lora.value("rank", c.lora.rank);
    c.lora.scaling = lora.value("scaling", c.lora.scaling);
    c.lora.targets = lora.value("targets", c.lora.targets);
    c.lora.joint_with_adapter = lora.value("joint_with_adapter", c.lora.joint_with_adapter);
    c.adapter = AdapterConfig::from_json(j.at("adapter"));
    c.train = TrainConfig::from_json(j.at("train"));
    const auto& dec = j.at("decoding");
    c.decoding.mode = parse_decoding(dec.value("mode", std::string("greedy")));
    c.decoding.top_k = dec.value("top_k", c.decoding.top_k);
    c.decoding.max_len = dec.value("max_len", c.decoding.max_len);
    const auto& ret = j.at("retrieval");
    c.retrieval.mode = parse_source(ret.value("mode", std::string("dataset")));
    c.retrieval.index = ret.value("index", std::string{});
    c.retrieval.k = ret.value("k", c.retrieval.k);
    c.retrieval.accuracy_ks = ret.value("accuracy_ks", c.retrieval.accuracy_ks);
    return c;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) {
        fail(ErrorKind::config, "config: [run] seeds must list at least one seed");
    }
    auto must_exist = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) {
            fail(ErrorKind::config, std::string("config: ") + what + " is not set");
        }
        if (!std::filesystem::exists(p)) {
            fail(ErrorKind::io, std::string("config: ") + what + " not found: " + p.string());
        }
    };
    must_exist(train_path, "[data] train");
    must_exist(test_path, "[data] test");
    if (!vocab_path.empty()) {
        must_exist(vocab_path, "[data] vocab");
    }
    if (!foundation_checkpoint.empty()) {
        must_exist(foundation_checkpoint, "[foundation] checkpoint");
    }
    if (retrieval.mode == KnowledgeSource::bm25) {
        must_exist(retrieval.index, "[retrieval] index");
    }
    if (retrieval.k == 0 || retrieval.accuracy_ks.empty()) {
        fail(ErrorKind::config, "config: [retrieval] k and accuracy_ks must be positive");
    }
    if (lora.rank == 0) {
        fail(ErrorKind::config, "config: [lora] rank must be >= 1");
    }
    if (decoding.max_len == 0) {
        fail(ErrorKind::config, "config: [decoding] max_len must be >= 1");
    }
    adapter.validate();
    train.validate();
}

std::string ExperimentConfig::hash() const { return text_digest(to_json().dump()); }

}  // namespace malm
