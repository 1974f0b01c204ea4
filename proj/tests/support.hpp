// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test binaries.

#pragma once

#include <algorithm>
#include <ctime>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "tensor/tensor.hpp"

namespace malm::testing {

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

/// Relative error with a small floor so entries whose true gradient is zero
/// compare on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss()` against the analytic gradient of every
/// entry of every leaf in `leaves`.
inline GradCheck check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> leaves, double h = 1e-5,
                                 double floor = 1e-6) {
    for (Tensor& t : leaves) {
        t.zero_grad();
    }
    backward(loss());
    GradCheck out;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor& leaf = leaves[li];
        const std::vector<double> analytic =
            leaf.has_grad() ? std::vector<double>(leaf.grad().begin(), leaf.grad().end())
                            : std::vector<double>(leaf.size(), 0.0);
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            const double saved = leaf.values()[i];
            leaf.values_mut()[i] = saved + h;
            const double up = loss().item();
            leaf.values_mut()[i] = saved - h;
            const double down = loss().item();
            leaf.values_mut()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error(analytic[i], numeric, floor);
            ++out.checked;
            if (err > out.max_rel_error) {
                out.max_rel_error = err;
                char buf[128];
                std::snprintf(buf, sizeof(buf), "leaf %zu[%zu] analytic %.6e numeric %.6e", li, i, analytic[i],
                              numeric);
                out.worst = buf;
            }
        }
    }
    return out;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(std::time(nullptr)));
        path_ = std::filesystem::temp_directory_path() / ("malm-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

}  // namespace malm::testing
