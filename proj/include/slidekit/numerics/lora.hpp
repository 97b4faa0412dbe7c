// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "slidekit/numerics/layers.hpp"

namespace slidekit {

struct LoraConfig {
  std::size_t rank = 64;
  double alpha = 16.0;
  double dropout = 0.05;
};

/// Frozen linear layer plus a trainable low-rank update:
///   y = base(x) + (alpha / rank) · (dropout(x)·Aᵀ)·Bᵀ
/// A (`down`) is rank×in, B (`up`) is out×rank and starts at zero.
struct LoraLinear {
  Linear base;
  Matrix down;
  Matrix up;
  double alpha = 16.0;
  double dropout = 0.05;

  std::size_t rank() const noexcept { return down.rows(); }
  double scaling() const noexcept { return alpha / static_cast<double>(rank()); }
  /// Only the adapter tensors; the base layer is never exposed for training.
  ParamList trainable_params(const std::string& prefix);
};

/// Wraps `base`. Throws ConfigError when rank is 0 or exceeds min(in, out).
LoraLinear make_lora(Linear base, const LoraConfig& cfg, Rng& rng);

/// Inverted-dropout mask (entries 0 or 1/(1-rate)) with the given shape.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

/// `mask` == nullptr means evaluation mode (no dropout on the adapter path).
Matrix lora_forward(const LoraLinear& layer, const Matrix& input, const Matrix* mask = nullptr);

struct LoraGrad {
  Matrix down;
  Matrix up;
  Matrix input;
};

LoraGrad lora_backward(const LoraLinear& layer, const Matrix& input, const Matrix& upstream,
                       const Matrix* mask = nullptr);

/// W + (alpha/rank)·B·A folded into a plain Linear; forward-equivalent in eval mode.
Linear lora_merge(const LoraLinear& layer);

}  // namespace slidekit
