// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "slidekit/numerics/matrix.hpp"

namespace slidekit {

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad;  // w.r.t. logits, (softmax - one_hot) / B
};

/// Mean over rows of -log softmax(logits_b)[target_b].
CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const std::size_t> targets);

/// Like cross_entropy but returns the summed loss and un-normalized gradient.
/// Gradient accumulation across micro-batches divides by the total row count.
CrossEntropyResult cross_entropy_sum(const Matrix& logits, std::span<const std::size_t> targets);

struct ContrastiveResult {
  double loss = 0.0;
  Matrix grad_image;
  Matrix grad_text;
};

/// Symmetric InfoNCE. Rows are L2-normalized, S = img·textᵀ / temperature and
/// loss = ½·[CE(S, diag) + CE(Sᵀ, diag)]. A zero-norm row is a DegenerateError.
ContrastiveResult info_nce(const Matrix& image_embs, const Matrix& text_embs, double temperature);

}  // namespace slidekit
