// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//
//   bytes 0..7   magic "MALMCKPT"
//   u32 LE       format version
//   u64 LE       header length in bytes
//   header       UTF-8 JSON: {"format_version", "sections": {name: {"config",
//                "arrays": [{"name", "shape": [r, c], "offset", "bytes"}]}}}
//   data         little-endian float64 arrays; offsets are relative to the
//                first data byte

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensor/tensor.hpp"

namespace malm {

inline constexpr std::uint32_t checkpoint_format_version = 1;

struct NamedArray {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
};

struct CheckpointSection {
    nlohmann::json config = nlohmann::json::object();
    std::vector<NamedArray> arrays;

    const NamedArray& array(const std::string& name) const;
    bool has_array(const std::string& name) const;
};

struct Checkpoint {
    std::map<std::string, CheckpointSection> sections;

    const CheckpointSection& section(const std::string& name) const;
    bool has_section(const std::string& name) const { return sections.count(name) != 0; }
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

NamedArray to_array(const std::string& name, const Tensor& t);
/// Copies the array into a tensor after checking the expected shape.
Tensor from_array(const NamedArray& array, std::size_t rows, std::size_t cols, bool requires_grad);

/// FNV-1a 64 over the file bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);
std::string text_digest(const std::string& text);

}  // namespace malm
