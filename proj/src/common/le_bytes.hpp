// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <iterator>
#include <ostream>

namespace malm {

template <typename T>
void put_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* bytes) {
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, bytes, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(tmp), std::end(tmp));
    }
    T value;
    std::memcpy(&value, tmp, sizeof(T));
    return value;
}

}  // namespace malm
