// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lm/foundation.hpp"
#include "train/adamw.hpp"

namespace malm {

struct PretrainConfig {
    std::size_t steps = 200;
    std::size_t batch_sequences = 8;
    AdamWConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 0.01};
    std::uint64_t seed = 0;
    /// Trailing share of the sequences held out for evaluation.
    double heldout_fraction = 0.1;
};

struct PretrainResult {
    Foundation model;
    double initial_heldout_loss = 0.0;
    double final_heldout_loss = 0.0;
    std::vector<double> step_losses;
};

/// Mean next-token cross-entropy per predicted token over `sequences`.
double mean_token_loss(const Foundation& model, std::span<const std::vector<TokenId>> sequences);

/// Next-token language-model training from scratch on already formatted
/// sequences (see `lm_sequence`). Aborts with a numeric error on a NaN loss.
PretrainResult pretrain_foundation(std::span<const std::vector<TokenId>> sequences, const FoundationConfig& config,
                                   const PretrainConfig& settings,
                                   const std::function<void(std::size_t, double)>& on_step = {});

/// `prompt ++ [BOS] ++ body ++ [EOS]`, cut to `max_len`. Plain text uses an
/// empty prompt; QA pairs use the question.
std::vector<TokenId> lm_sequence(std::span<const TokenId> prompt, std::span<const TokenId> body, std::size_t max_len);

}  // namespace malm
