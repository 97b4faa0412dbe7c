// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace slidekit {

/// Decoding parameters. Defaults are the generation settings used for both
/// instruction-tuned answers and best-of-N candidate collection.
struct GenerationConfig {
  double temperature = 0.7;
  std::size_t top_k = 50;
  double top_p = 0.95;
  std::size_t max_new_tokens = 128;

  /// Throws ConfigError unless temperature > 0, 0 < top_p <= 1, top_k >= 1.
  void validate() const;
};

/// Tolerance used when comparing the cumulative top-p mass against top_p.
inline constexpr double kTopPTolerance = 1e-12;

/// Temperature scaling, then top-k, then the minimal top-p prefix (ties by
/// lower index), renormalized. Filtered-out entries are exactly 0.
std::vector<double> sample_filter(std::span<const double> logits, const GenerationConfig& cfg);

}  // namespace slidekit
