// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/numerics/losses.hpp"

#include <cmath>
#include <vector>

#include "slidekit/error.hpp"
#include "slidekit/numerics/layers.hpp"

namespace slidekit {
namespace {

struct Normalized {
  Matrix unit;
  std::vector<double> norms;
};

Normalized normalize_rows(const Matrix& m, const char* which) {
  Normalized out{m, std::vector<double>(m.rows())};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = l2_norm(m.row(r));
    if (n == 0.0 || !std::isfinite(n))
      throw DegenerateError(std::string("info_nce: degenerate ") + which + " embedding at row " +
                            std::to_string(r));
    out.norms[r] = n;
    for (double& v : out.unit.row(r)) v /= n;
  }
  return out;
}

// Back-propagates through x / |x| row by row.
Matrix normalize_backward(const Normalized& n, const Matrix& d_unit) {
  Matrix dx(d_unit.rows(), d_unit.cols());
  for (std::size_t r = 0; r < d_unit.rows(); ++r) {
    const double proj = dot(n.unit.row(r), d_unit.row(r));
    for (std::size_t c = 0; c < d_unit.cols(); ++c)
      dx(r, c) = (d_unit(r, c) - n.unit(r, c) * proj) / n.norms[r];
  }
  return dx;
}

}  // namespace

CrossEntropyResult cross_entropy_sum(const Matrix& logits, std::span<const std::size_t> targets) {
  if (targets.size() != logits.rows())
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         logits.shape_string() + " logits");
  CrossEntropyResult out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    if (targets[b] >= logits.cols())
      throw IndexError("cross_entropy: target " + std::to_string(targets[b]) +
                       " out of range for vocabulary of " + std::to_string(logits.cols()));
    const auto row = logits.row(b);
    out.loss += log_sum_exp(row) - row[targets[b]];
    const auto p = softmax(row);
    for (std::size_t v = 0; v < p.size(); ++v) out.grad(b, v) = p[v];
    out.grad(b, targets[b]) -= 1.0;
  }
  return out;
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const std::size_t> targets) {
  auto out = cross_entropy_sum(logits, targets);
  if (logits.rows() == 0) return out;
  const double inv = 1.0 / static_cast<double>(logits.rows());
  out.loss *= inv;
  out.grad *= inv;
  return out;
}

ContrastiveResult info_nce(const Matrix& image_embs, const Matrix& text_embs, double temperature) {
  require_same_shape(image_embs, text_embs, "info_nce");
  if (!(temperature > 0.0)) throw ConfigError("info_nce: temperature must be positive");
  const std::size_t batch = image_embs.rows();
  const Normalized img = normalize_rows(image_embs, "image");
  const Normalized txt = normalize_rows(text_embs, "text");

  Matrix sim = matmul_nt(img.unit, txt.unit);
  sim *= 1.0 / temperature;
  std::vector<std::size_t> diag(batch);
  for (std::size_t i = 0; i < batch; ++i) diag[i] = i;

  const auto rows = cross_entropy(sim, diag);
  const auto cols = cross_entropy(transpose(sim), diag);

  Matrix d_sim = rows.grad + transpose(cols.grad);
  d_sim *= 0.5 / temperature;

  ContrastiveResult out;
  out.loss = 0.5 * (rows.loss + cols.loss);
  out.grad_image = normalize_backward(img, matmul(d_sim, txt.unit));
  out.grad_text = normalize_backward(txt, matmul_tn(d_sim, img.unit));
  return out;
}

}  // namespace slidekit
