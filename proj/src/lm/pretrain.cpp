// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "lm/pretrain.hpp"

#include <cmath>

#include "common/error.hpp"

namespace malm {
namespace {

Tensor sequence_loss(const Foundation& model, const std::vector<TokenId>& seq) {
    std::span<const TokenId> all(seq);
    StreamOutput out = model.forward_stream(all.first(seq.size() - 1));
    return cross_entropy(out.logits, all.subspan(1));
}

}  // namespace

std::vector<TokenId> lm_sequence(std::span<const TokenId> prompt, std::span<const TokenId> body, std::size_t max_len) {
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    seq.push_back(text::Vocabulary::bos);
    seq.insert(seq.end(), body.begin(), body.end());
    seq.push_back(text::Vocabulary::eos);
    if (seq.size() > max_len) {
        seq.resize(max_len);
    }
    return seq;
}

double mean_token_loss(const Foundation& model, std::span<const std::vector<TokenId>> sequences) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seq : sequences) {
        if (seq.size() < 2) {
            continue;
        }
        total += sequence_loss(model, seq).item();
        count += seq.size() - 1;
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

PretrainResult pretrain_foundation(std::span<const std::vector<TokenId>> sequences, const FoundationConfig& config,
                                   const PretrainConfig& settings,
                                   const std::function<void(std::size_t, double)>& on_step) {
    std::vector<std::vector<TokenId>> usable;
    for (const auto& s : sequences) {
        if (s.size() >= 2) {
            usable.push_back(s);
        }
    }
    if (usable.size() < 2) {
        fail(ErrorKind::invalid_argument, "pretrain: need at least 2 sequences of length >= 2");
    }
    auto n_held = static_cast<std::size_t>(std::ceil(settings.heldout_fraction * static_cast<double>(usable.size())));
    n_held = std::clamp<std::size_t>(n_held, 1, usable.size() - 1);
    std::span<const std::vector<TokenId>> train(usable.data(), usable.size() - n_held);
    std::span<const std::vector<TokenId>> held(usable.data() + train.size(), n_held);

    Rng rng(settings.seed);
    Rng init_rng = rng.fork();
    PretrainResult result{Foundation(config, init_rng), 0.0, 0.0, {}};
    Foundation& model = result.model;
    std::vector<Tensor> params = model.params().tensors();
    AdamW optimizer(settings.optimizer);

    result.initial_heldout_loss = mean_token_loss(model, held);
    for (std::size_t step = 0; step < settings.steps; ++step) {
        Tensor loss;
        std::size_t tokens = 0;
        for (std::size_t b = 0; b < settings.batch_sequences; ++b) {
            const auto& seq = train[rng.below(train.size())];
            Tensor l = sequence_loss(model, seq);
            loss = loss.defined() ? add(loss, l) : l;
            tokens += seq.size() - 1;
        }
        loss = scale(loss, 1.0 / static_cast<double>(tokens));
        const double value = loss.item();
        if (!std::isfinite(value)) {
            fail(ErrorKind::numeric, "pretrain: loss diverged (" + std::to_string(value) + ") at step " +
                                         std::to_string(step));
        }
        model.params().zero_grad();
        backward(loss);
        optimizer.step(params);
        result.step_losses.push_back(value);
        if (on_step) {
            on_step(step, value);
        }
    }
    model.params().zero_grad();
    result.final_heldout_loss = mean_token_loss(model, held);
    return result;
}

}  // namespace malm
