// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace malm {

enum class ErrorKind {
    invalid_argument,
    io,
    parse,
    schema,
    dimension,
    numeric,
    config,
    retrieval,
    alignment,
    structural,
    length,
};

const char* error_kind_name(ErrorKind kind) noexcept;

/// Every recoverable failure in the library surfaces as this exception; the C
/// API maps `kind` onto a status code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace malm
