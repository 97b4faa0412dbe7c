// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/numerics/lora.hpp"

#include <algorithm>
#include <cmath>

#include "slidekit/error.hpp"

namespace slidekit {
namespace {

Matrix masked(const Matrix& input, const Matrix* mask) {
  if (mask == nullptr) return input;
  require_same_shape(input, *mask, "lora dropout mask");
  return hadamard(input, *mask);
}

}  // namespace

ParamList LoraLinear::trainable_params(const std::string& prefix) {
  return {{prefix + ".lora_down", down}, {prefix + ".lora_up", up}};
}

LoraLinear make_lora(Linear base, const LoraConfig& cfg, Rng& rng) {
  const std::size_t limit = std::min(base.in_dim(), base.out_dim());
  if (cfg.rank == 0 || cfg.rank > limit)
    throw ConfigError("lora: rank " + std::to_string(cfg.rank) + " must be in [1, " +
                      std::to_string(limit) + "] for a " + std::to_string(base.in_dim()) + "->" +
                      std::to_string(base.out_dim()) + " layer");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ConfigError("lora: dropout must be in [0, 1)");
  LoraLinear l;
  const std::size_t in = base.in_dim();
  const std::size_t out = base.out_dim();
  l.base = std::move(base);
  l.down = Matrix::uniform(cfg.rank, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  l.up = Matrix(out, cfg.rank, 0.0);
  l.alpha = cfg.alpha;
  l.dropout = cfg.dropout;
  return l;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix mask(rows, cols, 1.0);
  if (rate <= 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : mask.values()) v = keep(rng) ? scale : 0.0;
  return mask;
}

Matrix lora_forward(const LoraLinear& layer, const Matrix& input, const Matrix* mask) {
  Matrix out = forward(layer.base, input);
  Matrix low = matmul_nt(masked(input, mask), layer.down);
  Matrix update = matmul_nt(low, layer.up);
  update *= layer.scaling();
  out += update;
  return out;
}

LoraGrad lora_backward(const LoraLinear& layer, const Matrix& input, const Matrix& upstream,
                       const Matrix* mask) {
  const Matrix x = masked(input, mask);
  const Matrix low = matmul_nt(x, layer.down);
  if (upstream.rows() != input.rows() || upstream.cols() != layer.base.out_dim())
    throw DimensionError("lora backward: upstream " + upstream.shape_string() + " for input " +
                         input.shape_string());
  const double s = layer.scaling();

  LoraGrad g;
  g.up = matmul_tn(upstream, low) * s;
  Matrix d_low = matmul(upstream, layer.up) * s;
  g.down = matmul_tn(d_low, x);
  Matrix d_x = matmul(d_low, layer.down);
  if (mask != nullptr) d_x = hadamard(d_x, *mask);
  g.input = matmul(upstream, layer.base.weight) + d_x;
  return g;
}

Linear lora_merge(const LoraLinear& layer) {
  Linear merged = layer.base;
  merged.weight += matmul(layer.up, layer.down) * layer.scaling();
  return merged;
}

}  // namespace slidekit
