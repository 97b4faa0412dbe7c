// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slidekit {

std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const double> values);

/// First eight bytes of SHA-256, little endian. Stable across platforms, so
/// it is safe to use for deriving seeds from identifiers.
std::uint64_t stable_hash64(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws FormatError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace slidekit
