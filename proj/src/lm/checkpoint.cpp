// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "lm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "common/error.hpp"
#include "common/le_bytes.hpp"

namespace malm {
namespace {

constexpr char magic[8] = {'M', 'A', 'L', 'M', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace

const NamedArray& CheckpointSection::array(const std::string& name) const {
    for (const NamedArray& a : arrays) {
        if (a.name == name) {
            return a;
        }
    }
    fail(ErrorKind::schema, "checkpoint: missing array '" + name + "'");
}

bool CheckpointSection::has_array(const std::string& name) const {
    for (const NamedArray& a : arrays) {
        if (a.name == name) {
            return true;
        }
    }
    return false;
}

const CheckpointSection& Checkpoint::section(const std::string& name) const {
    auto it = sections.find(name);
    if (it == sections.end()) {
        fail(ErrorKind::schema, "checkpoint: missing section '" + name + "'");
    }
    return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    nlohmann::json header;
    header["format_version"] = checkpoint_format_version;
    header["sections"] = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, section] : checkpoint.sections) {
        nlohmann::json manifest = nlohmann::json::array();
        for (const NamedArray& a : section.arrays) {
            if (a.data.size() != a.rows * a.cols) {
                fail(ErrorKind::dimension, "checkpoint: array '" + a.name + "' has inconsistent shape");
            }
            const std::uint64_t bytes = a.data.size() * sizeof(double);
            manifest.push_back({{"name", a.name}, {"shape", {a.rows, a.cols}}, {"offset", offset}, {"bytes", bytes}});
            offset += bytes;
        }
        header["sections"][name] = {{"config", section.config}, {"arrays", manifest}};
    }
    const std::string header_text = header.dump();

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorKind::io, "cannot write checkpoint " + path.string());
    }
    out.write(magic, sizeof(magic));
    put_le<std::uint32_t>(out, checkpoint_format_version);
    put_le<std::uint64_t>(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, section] : checkpoint.sections) {
        for (const NamedArray& a : section.arrays) {
            for (double v : a.data) {
                put_le<double>(out, v);
            }
        }
    }
    if (!out) {
        fail(ErrorKind::io, "short write to checkpoint " + path.string());
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io, "cannot open checkpoint " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = "checkpoint " + path.string();
    if (bytes.size() < 20 || std::memcmp(bytes.data(), magic, sizeof(magic)) != 0) {
        fail(ErrorKind::parse, where + ": bad magic");
    }
    const auto version = get_le<std::uint32_t>(bytes.data() + 8);
    if (version != checkpoint_format_version) {
        fail(ErrorKind::parse, where + ": unsupported format version " + std::to_string(version));
    }
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 12);
    if (20 + header_len > bytes.size()) {
        fail(ErrorKind::parse, where + ": truncated header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, where + ": header is not valid JSON (" + e.what() + ")");
    }
    const unsigned char* data = bytes.data() + 20 + header_len;
    const std::size_t data_len = bytes.size() - 20 - header_len;

    Checkpoint ckpt;
    try {
        for (const auto& [name, sec] : header.at("sections").items()) {
            CheckpointSection section;
            section.config = sec.at("config");
            for (const auto& entry : sec.at("arrays")) {
                NamedArray a;
                a.name = entry.at("name").get<std::string>();
                a.rows = entry.at("shape").at(0).get<std::size_t>();
                a.cols = entry.at("shape").at(1).get<std::size_t>();
                const auto offset = entry.at("offset").get<std::uint64_t>();
                const auto nbytes = entry.at("bytes").get<std::uint64_t>();
                if (nbytes != a.rows * a.cols * sizeof(double) || offset + nbytes > data_len) {
                    fail(ErrorKind::parse, where + ": array '" + a.name + "' has an inconsistent manifest entry");
                }
                a.data.resize(a.rows * a.cols);
                for (std::size_t i = 0; i < a.data.size(); ++i) {
                    a.data[i] = get_le<double>(data + offset + i * sizeof(double));
                }
                section.arrays.push_back(std::move(a));
            }
            ckpt.sections.emplace(name, std::move(section));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, where + ": malformed manifest (" + e.what() + ")");
    }
    return ckpt;
}

NamedArray to_array(const std::string& name, const Tensor& t) {
    return NamedArray{name, t.rows(), t.cols(), t.to_vector()};
}

Tensor from_array(const NamedArray& array, std::size_t rows, std::size_t cols, bool requires_grad) {
    if (array.rows != rows || array.cols != cols) {
        fail(ErrorKind::dimension, "checkpoint array '" + array.name + "' has shape [" + std::to_string(array.rows) +
                                       "x" + std::to_string(array.cols) + "], config expects [" + std::to_string(rows) +
                                       "x" + std::to_string(cols) + "]");
    }
    return Tensor::from(rows, cols, array.data, requires_grad);
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io, "cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a(bytes.data(), bytes.size()));
}

std::string text_digest(const std::string& text) {
    return hex64(fnv1a(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace malm
