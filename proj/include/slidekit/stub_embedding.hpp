// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slidekit {

/// L2-normalized Gaussian vector drawn from a generator seeded by
/// stable_hash64(key). Same key, same vector, on every platform run.
std::vector<double> seeded_unit_vector(std::string_view key, std::size_t dim);

/// Seed key for the stub patch encoder; shared with the mock feature service
/// so both produce identical embeddings.
std::string patch_embedding_key(std::string_view slide_id, long x, long y, std::uint64_t seed);

/// Signed feature hashing of lower-cased alphanumeric words. Texts sharing
/// vocabulary get positive cosine similarity; text without words maps to the
/// zero vector.
std::vector<double> hashed_text_embedding(std::string_view text, std::size_t dim);

}  // namespace slidekit
