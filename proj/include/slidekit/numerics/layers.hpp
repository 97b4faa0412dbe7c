// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slidekit/numerics/matrix.hpp"

namespace slidekit {

/// y = x·Wᵀ + b, with W stored out×in and b as a 1×out row.
struct Linear {
  Matrix weight;
  Matrix bias;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
  ParamList params(const std::string& prefix);
};

struct Tanh {};
struct Sigmoid {};
/// Tanh approximation: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³))).
struct Gelu {};
/// Row-wise softmax over the last dimension.
struct Softmax {};

/// Normalizes each row to zero mean / unit variance, then applies gain and shift.
struct LayerNorm {
  static constexpr double kEpsilon = 1e-5;
  Matrix gain;   // 1×dim
  Matrix shift;  // 1×dim

  std::size_t dim() const noexcept { return gain.cols(); }
  ParamList params(const std::string& prefix);
};

using Layer = std::variant<Linear, Tanh, Sigmoid, Gelu, LayerNorm, Softmax>;

/// Gradient of a layer: `params` has the same shape as the layer's
/// parameters (empty for parameter-free kinds), `input` matches the input.
template <class L>
struct LayerGrad {
  L params;
  Matrix input;
};

/// Uniform ±1/√in initialization.
Linear make_linear(std::size_t in, std::size_t out, Rng& rng);
/// gain = 1, shift = 0.
LayerNorm make_layer_norm(std::size_t dim);

Matrix forward(const Linear& layer, const Matrix& input);
Matrix forward(const Tanh&, const Matrix& input);
Matrix forward(const Sigmoid&, const Matrix& input);
Matrix forward(const Gelu&, const Matrix& input);
Matrix forward(const Softmax&, const Matrix& input);
Matrix forward(const LayerNorm& layer, const Matrix& input);

LayerGrad<Linear> backward(const Linear& layer, const Matrix& input, const Matrix& upstream);
LayerGrad<Tanh> backward(const Tanh&, const Matrix& input, const Matrix& upstream);
LayerGrad<Sigmoid> backward(const Sigmoid&, const Matrix& input, const Matrix& upstream);
LayerGrad<Gelu> backward(const Gelu&, const Matrix& input, const Matrix& upstream);
LayerGrad<Softmax> backward(const Softmax&, const Matrix& input, const Matrix& upstream);
LayerGrad<LayerNorm> backward(const LayerNorm& layer, const Matrix& input,
                              const Matrix& upstream);

/// Dispatching entry points over the Layer variant.
Matrix apply_layer(const Layer& layer, const Matrix& input);
LayerGrad<Layer> layer_gradient(const Layer& layer, const Matrix& input, const Matrix& upstream);

double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

/// Softmax of one vector (max-shifted). Entries equal to -inf get probability 0.
std::vector<double> softmax(std::span<const double> logits);
/// log-sum-exp, max-shifted.
double log_sum_exp(std::span<const double> values);

}  // namespace slidekit
