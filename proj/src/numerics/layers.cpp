// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/numerics/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slidekit/error.hpp"

namespace slidekit {
namespace {

constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

void require_cols(const Matrix& input, std::size_t expected, const char* kind) {
  if (input.cols() != expected)
    throw DimensionError(std::string(kind) + ": input " + input.shape_string() +
                         " does not match layer input dim " + std::to_string(expected));
}

template <class F>
Matrix map(const Matrix& input, F f) {
  Matrix out = input;
  for (double& v : out.values()) v = f(v);
  return out;
}

}  // namespace

ParamList Linear::params(const std::string& prefix) {
  return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

ParamList LayerNorm::params(const std::string& prefix) {
  return {{prefix + ".gain", gain}, {prefix + ".shift", shift}};
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = Matrix::uniform(out, in, bound, rng);
  l.bias = Matrix::uniform(1, out, bound, rng);
  return l;
}

LayerNorm make_layer_norm(std::size_t dim) { return {Matrix(1, dim, 1.0), Matrix(1, dim, 0.0)}; }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluCoeff * x * x * x)));
}

double gelu_derivative(double x) {
  const double t = std::tanh(kSqrt2OverPi * (x + kGeluCoeff * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
}

double log_sum_exp(std::span<const double> values) {
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size(), 0.0);
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  if (m == -std::numeric_limits<double>::infinity())
    throw DegenerateError("softmax: all logits are -inf");
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

Matrix forward(const Linear& layer, const Matrix& input) {
  require_cols(input, layer.in_dim(), "linear");
  return add_row_broadcast(matmul_nt(input, layer.weight), layer.bias);
}

Matrix forward(const Tanh&, const Matrix& input) {
  return map(input, [](double v) { return std::tanh(v); });
}

Matrix forward(const Sigmoid&, const Matrix& input) {
  return map(input, [](double v) { return sigmoid(v); });
}

Matrix forward(const Gelu&, const Matrix& input) {
  return map(input, [](double v) { return gelu(v); });
}

Matrix forward(const Softmax&, const Matrix& input) {
  Matrix out(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const auto p = softmax(input.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

Matrix forward(const LayerNorm& layer, const Matrix& input) {
  require_cols(input, layer.dim(), "layer_norm");
  const auto n = static_cast<double>(input.cols());
  Matrix out(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const auto x = input.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + LayerNorm::kEpsilon);
    for (std::size_t c = 0; c < x.size(); ++c)
      out(r, c) = (x[c] - mean) * inv_std * layer.gain(0, c) + layer.shift(0, c);
  }
  return out;
}

LayerGrad<Linear> backward(const Linear& layer, const Matrix& input, const Matrix& upstream) {
  require_cols(input, layer.in_dim(), "linear backward");
  if (upstream.rows() != input.rows() || upstream.cols() != layer.out_dim())
    throw DimensionError("linear backward: upstream " + upstream.shape_string() +
                         " for input " + input.shape_string());
  LayerGrad<Linear> g;
  g.params.weight = matmul_tn(upstream, input);
  g.params.bias = column_sums(upstream);
  g.input = matmul(upstream, layer.weight);
  return g;
}

LayerGrad<Tanh> backward(const Tanh&, const Matrix& input, const Matrix& upstream) {
  require_same_shape(input, upstream, "tanh backward");
  Matrix dx = upstream;
  auto d = dx.values();
  auto x = input.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double t = std::tanh(x[i]);
    d[i] *= 1.0 - t * t;
  }
  return {{}, std::move(dx)};
}

LayerGrad<Sigmoid> backward(const Sigmoid&, const Matrix& input, const Matrix& upstream) {
  require_same_shape(input, upstream, "sigmoid backward");
  Matrix dx = upstream;
  auto d = dx.values();
  auto x = input.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = sigmoid(x[i]);
    d[i] *= s * (1.0 - s);
  }
  return {{}, std::move(dx)};
}

LayerGrad<Gelu> backward(const Gelu&, const Matrix& input, const Matrix& upstream) {
  require_same_shape(input, upstream, "gelu backward");
  Matrix dx = upstream;
  auto d = dx.values();
  auto x = input.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= gelu_derivative(x[i]);
  return {{}, std::move(dx)};
}

LayerGrad<Softmax> backward(const Softmax& s, const Matrix& input, const Matrix& upstream) {
  require_same_shape(input, upstream, "softmax backward");
  const Matrix y = forward(s, input);
  Matrix dx(input.rows(), input.cols());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const double inner = dot(y.row(r), upstream.row(r));
    for (std::size_t c = 0; c < input.cols(); ++c) dx(r, c) = y(r, c) * (upstream(r, c) - inner);
  }
  return {{}, std::move(dx)};
}

LayerGrad<LayerNorm> backward(const LayerNorm& layer, const Matrix& input,
                              const Matrix& upstream) {
  require_cols(input, layer.dim(), "layer_norm backward");
  require_same_shape(input, upstream, "layer_norm backward");
  const std::size_t d = input.cols();
  const auto n = static_cast<double>(d);
  LayerGrad<LayerNorm> g{{Matrix(1, d), Matrix(1, d)}, Matrix(input.rows(), d)};
  std::vector<double> xhat(d), dxhat(d);
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const auto x = input.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + LayerNorm::kEpsilon);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      xhat[c] = (x[c] - mean) * inv_std;
      dxhat[c] = upstream(r, c) * layer.gain(0, c);
      g.params.gain(0, c) += upstream(r, c) * xhat[c];
      g.params.shift(0, c) += upstream(r, c);
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat[c];
    }
    mean_dxhat /= n;
    mean_dxhat_xhat /= n;
    for (std::size_t c = 0; c < d; ++c)
      g.input(r, c) = inv_std * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
  }
  return g;
}

Matrix apply_layer(const Layer& layer, const Matrix& input) {
  return std::visit([&](const auto& l) { return forward(l, input); }, layer);
}

LayerGrad<Layer> layer_gradient(const Layer& layer, const Matrix& input, const Matrix& upstream) {
  return std::visit(
      [&](const auto& l) -> LayerGrad<Layer> {
        auto g = backward(l, input, upstream);
        return {Layer{std::move(g.params)}, std::move(g.input)};
      },
      layer);
}

}  // namespace slidekit
