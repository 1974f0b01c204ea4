// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace malm {
namespace {

double l2_norm(std::span<const Tensor> tensors) {
    double total = 0.0;
    for (const Tensor& t : tensors) {
        for (double v : t.values()) {
            total += v * v;
        }
    }
    return std::sqrt(total);
}

text::Sample with_clipped_knowledge(const text::Sample& s, std::size_t max_tokens) {
    text::Sample out = s;
    if (out.knowledge.size() > max_tokens) {
        out.knowledge.resize(max_tokens);
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(optimizer.lr >= 0.0)) {
        fail(ErrorKind::config, "train: learning rate must be >= 0");
    }
    if (accumulation == 0 || batch_size == 0) {
        fail(ErrorKind::config, "train: accumulation steps and batch size must be >= 1");
    }
    if (!train_adapter && !train_lora) {
        fail(ErrorKind::config, "train: no parameter group selected");
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", optimizer.lr},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"eps", optimizer.eps},
            {"weight_decay", optimizer.weight_decay},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"accumulation", accumulation},
            {"seed", seed},
            {"train_adapter", train_adapter},
            {"train_lora", train_lora},
            {"knowledge_max_tokens", knowledge_max_tokens}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.optimizer.lr = j.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = j.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.accumulation = j.value("accumulation", c.accumulation);
    c.seed = j.value("seed", c.seed);
    c.train_adapter = j.value("train_adapter", c.train_adapter);
    c.train_lora = j.value("train_lora", c.train_lora);
    c.knowledge_max_tokens = j.value("knowledge_max_tokens", c.knowledge_max_tokens);
    c.validate();
    return c;
}

nlohmann::json TrainRecord::to_json() const {
    nlohmann::json norms = nlohmann::json::object();
    for (const auto& [k, v] : group_norms) {
        norms[k] = v;
    }
    return {{"step", step},         {"epoch", epoch},     {"loss", loss},
            {"wall_time", wall_seconds}, {"skipped", skipped}, {"group_norms", norms}};
}

std::vector<TokenId> answer_targets(const text::Sample& sample) {
    std::vector<TokenId> t = sample.answer;
    t.push_back(text::Vocabulary::eos);
    return t;
}

std::span<const TokenId> clipped_knowledge(const text::Sample& sample, std::size_t max_tokens) {
    std::span<const TokenId> k(sample.knowledge);
    return k.first(std::min(k.size(), max_tokens));
}

Tensor teacher_forced_loss(const MalmModel& model, const text::Sample& sample, Rng& rng, bool training,
                           const StreamFeatures* cached) {
    if (sample.answer.empty()) {
        fail(ErrorKind::invalid_argument, "teacher_forced_loss: empty answer (sample " + sample.id + ")");
    }
    StreamFeatures local;
    if (cached == nullptr) {
        local = encode_streams(model, sample.question, sample.answer, sample.knowledge);
        cached = &local;
    }
    Tensor logits = output_logits(model, *cached, rng, training);
    const std::vector<TokenId> targets = answer_targets(sample);
    return cross_entropy(logits, targets);
}

Tensor batch_loss(const MalmModel& model, std::span<const text::Sample> samples, Rng& rng, bool training,
                  std::size_t knowledge_max_tokens) {
    Tensor total;
    for (const text::Sample& s : samples) {
        Tensor l = teacher_forced_loss(model, with_clipped_knowledge(s, knowledge_max_tokens), rng, training);
        total = total.defined() ? add(total, l) : l;
    }
    return total;
}

TrainSummary train_adapter(MalmModel& model, std::span<const text::Sample> dataset, const TrainConfig& config,
                           const std::function<void(const TrainRecord&)>& on_record) {
    config.validate();
    if (dataset.empty()) {
        fail(ErrorKind::invalid_argument, "train: empty dataset");
    }
    const bool use_adapter = config.train_adapter && model.adapter_config.layers > 0;
    const bool use_lora = config.train_lora && model.lora.has_value();
    if (!use_adapter && !use_lora) {
        fail(ErrorKind::config, "train: selected parameter groups hold no trainable weights");
    }

    model.foundation.params().set_requires_grad(false);
    std::vector<Tensor> adapter_params = model.adapter.trainables();
    std::vector<Tensor> lora_params = model.lora ? model.lora->trainables() : std::vector<Tensor>{};
    for (Tensor& t : adapter_params) {
        t.set_requires_grad(use_adapter);
    }
    for (Tensor& t : lora_params) {
        t.set_requires_grad(use_lora);
    }
    std::vector<Tensor> trainable;
    if (use_adapter) {
        trainable.insert(trainable.end(), adapter_params.begin(), adapter_params.end());
    }
    if (use_lora) {
        trainable.insert(trainable.end(), lora_params.begin(), lora_params.end());
    }

    std::vector<text::Sample> samples;
    samples.reserve(dataset.size());
    for (const text::Sample& s : dataset) {
        samples.push_back(with_clipped_knowledge(s, config.knowledge_max_tokens));
    }
    // With the foundation frozen its hidden states are fixed; compute them once.
    std::vector<StreamFeatures> cache;
    if (!use_lora) {
        cache.reserve(samples.size());
        for (const text::Sample& s : samples) {
            cache.push_back(encode_streams(model, s.question, s.answer, s.knowledge));
        }
    }

    Rng order_rng(config.seed);
    Rng dropout_rng = order_rng.fork();
    AdamW optimizer(config.optimizer);
    TrainSummary summary;
    const auto start = std::chrono::steady_clock::now();
    const std::size_t window = config.accumulation * config.batch_size;
    std::size_t nan_streak = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(std::span<std::size_t>(order));

        for (std::size_t begin = 0; begin < order.size(); begin += window) {
            const std::size_t end = std::min(order.size(), begin + window);
            const double inv_count = 1.0 / static_cast<double>(end - begin);
            for (Tensor& t : trainable) {
                t.zero_grad();
            }
            double window_loss = 0.0;
            for (std::size_t micro = begin; micro < end; micro += config.batch_size) {
                const std::size_t micro_end = std::min(end, micro + config.batch_size);
                Tensor loss;
                for (std::size_t i = micro; i < micro_end; ++i) {
                    const std::size_t idx = order[i];
                    Tensor l = teacher_forced_loss(model, samples[idx], dropout_rng, true,
                                                   cache.empty() ? nullptr : &cache[idx]);
                    loss = loss.defined() ? add(loss, l) : l;
                }
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    if (++nan_streak >= config.max_nan_streak) {
                        fail(ErrorKind::numeric, "train: loss non-finite for " + std::to_string(nan_streak) +
                                                     " consecutive micro-steps (epoch " + std::to_string(epoch) + ")");
                    }
                    continue;
                }
                nan_streak = 0;
                window_loss += value;
                backward(scale(loss, inv_count));
            }

            TrainRecord record;
            record.step = summary.optimizer_steps + summary.skipped_steps;
            record.epoch = epoch;
            record.loss = window_loss * inv_count;
            record.skipped = !optimizer.step(trainable);
            if (record.skipped) {
                ++summary.skipped_steps;
            } else {
                ++summary.optimizer_steps;
            }
            record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (use_adapter) {
                record.group_norms["adapter"] = l2_norm(adapter_params);
            }
            if (use_lora) {
                record.group_norms["lora"] = l2_norm(lora_params);
            }
            if (on_record) {
                on_record(record);
            }
            summary.records.push_back(std::move(record));
        }
        if (!config.checkpoint_dir.empty()) {
            std::filesystem::create_directories(config.checkpoint_dir);
            auto path = config.checkpoint_dir / ("epoch-" + std::to_string(epoch + 1) + ".ckpt");
            model.save(path);
            summary.checkpoints.push_back(path);
        }
    }
    for (Tensor& t : trainable) {
        t.zero_grad();
    }
    return summary;
}

}  // namespace malm
