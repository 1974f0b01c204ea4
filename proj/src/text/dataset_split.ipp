// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace malm::text {

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& items, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        fail(ErrorKind::invalid_argument, "split_dataset: fraction must lie in (0, 1)");
    }
    if (items.size() < 2) {
        fail(ErrorKind::invalid_argument, "split_dataset: need at least 2 samples, got " + std::to_string(items.size()));
    }
    const std::size_t n = items.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    std::pair<std::vector<T>, std::vector<T>> out;
    for (std::size_t i : train_idx) {
        out.first.push_back(items[i]);
    }
    for (std::size_t i : test_idx) {
        out.second.push_back(items[i]);
    }
    return out;
}

}  // namespace malm::text
