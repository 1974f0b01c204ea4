// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "common/error.hpp"

namespace malm {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::io: return "io error";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::schema: return "schema error";
        case ErrorKind::dimension: return "dimension error";
        case ErrorKind::numeric: return "numeric fault";
        case ErrorKind::config: return "configuration error";
        case ErrorKind::retrieval: return "retrieval error";
        case ErrorKind::alignment: return "alignment error";
        case ErrorKind::structural: return "structural error";
        case ErrorKind::length: return "length error";
    }
    return "error";
}

}  // namespace malm
