// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/vision/tower.hpp"

#include <cmath>

#include "slidekit/error.hpp"

namespace slidekit::vision {
namespace {

// Intermediate activations of the aggregator for one bag.
struct AggregatorTrace {
  Matrix hidden;        // N×hidden
  Matrix tanh_pre;      // N×attention
  Matrix sigmoid_pre;   // N×attention
  Matrix gated;         // N×attention
  Matrix scores;        // N×1
  std::vector<double> weights;
};

AggregatorTrace trace_aggregator(const GatedAttentionNet& net, const Matrix& patches) {
  if (patches.rows() == 0) throw EmptyBagError("cbpa: bag has no patches");
  if (patches.cols() != net.fc.in_dim())
    throw DimensionError("cbpa: patches " + patches.shape_string() +
                         " do not match aggregator input dim " + std::to_string(net.fc.in_dim()));
  AggregatorTrace t;
  t.hidden = forward(net.fc, patches);
  t.tanh_pre = forward(net.attention_tanh, t.hidden);
  t.sigmoid_pre = forward(net.attention_sigmoid, t.hidden);
  t.gated = hadamard(forward(Tanh{}, t.tanh_pre), forward(Sigmoid{}, t.sigmoid_pre));
  t.scores = forward(net.score, t.gated);
  t.weights = softmax(t.scores.values());
  return t;
}

Matrix weighted_rows(std::span<const double> weights, const Matrix& rows) {
  return matmul(Matrix::row_vector(weights), rows);
}

// Gradient of softmax inputs given output weights and upstream.
std::vector<double> softmax_input_grad(std::span<const double> w, std::span<const double> dw) {
  const double inner = dot(w, dw);
  std::vector<double> ds(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) ds[i] = w[i] * (dw[i] - inner);
  return ds;
}

struct PoolerTrace {
  Matrix q;        // 1×model
  Matrix keys;     // N×model
  Matrix values;   // N×model
  std::vector<double> weights;
  Matrix context;  // 1×model
  Matrix pooled;   // 1×model
};

PoolerTrace trace_pooler(const AttentionPooler& p, const Matrix& tokens) {
  if (tokens.rows() == 0) throw EmptyBagError("projector: no input tokens");
  if (tokens.cols() != p.key_proj.in_dim())
    throw DimensionError("projector: tokens " + tokens.shape_string() +
                         " do not match pooler input dim " + std::to_string(p.key_proj.in_dim()));
  PoolerTrace t;
  t.q = forward(p.query_proj, p.query);
  t.keys = forward(p.key_proj, tokens);
  t.values = forward(p.value_proj, tokens);
  Matrix s = matmul_nt(t.q, t.keys);
  s *= 1.0 / std::sqrt(static_cast<double>(t.q.cols()));
  t.weights = softmax(s.values());
  t.context = weighted_rows(t.weights, t.values);
  t.pooled = forward(p.out_proj, t.context);
  return t;
}

void append(ParamList& into, ParamList more) {
  for (auto& p : more) into.push_back(std::move(p));
}

}  // namespace

AggregatorDims GatedAttentionNet::dims() const {
  return {fc.in_dim(), fc.out_dim(), attention_tanh.out_dim()};
}

ParamList GatedAttentionNet::params() {
  ParamList out = fc.params("aggregator.fc");
  append(out, attention_tanh.params("aggregator.attention_tanh"));
  append(out, attention_sigmoid.params("aggregator.attention_sigmoid"));
  append(out, score.params("aggregator.score"));
  return out;
}

GatedAttentionNet make_gated_attention(const AggregatorDims& dims, Rng& rng) {
  if (dims.input == 0 || dims.hidden == 0 || dims.attention == 0)
    throw ConfigError("aggregator: dims must be positive");
  GatedAttentionNet net;
  net.fc = make_linear(dims.input, dims.hidden, rng);
  net.attention_tanh = make_linear(dims.hidden, dims.attention, rng);
  net.attention_sigmoid = make_linear(dims.hidden, dims.attention, rng);
  net.score = make_linear(dims.attention, 1, rng);
  return net;
}

std::vector<double> attention_scores(const GatedAttentionNet& net, const Matrix& patches) {
  const auto t = trace_aggregator(net, patches);
  return {t.scores.values().begin(), t.scores.values().end()};
}

SlideEmbedding cbpa_forward(const GatedAttentionNet& net, const Matrix& patches) {
  auto t = trace_aggregator(net, patches);
  Matrix vector = weighted_rows(t.weights, t.hidden);
  return {std::move(vector), std::move(t.weights)};
}

AggregatorGrad cbpa_backward(const GatedAttentionNet& net, const Matrix& patches,
                             const Matrix& d_vector, std::span<const double> d_weights) {
  const auto t = trace_aggregator(net, patches);
  const std::size_t n = patches.rows();
  if (d_vector.rows() != 1 || d_vector.cols() != t.hidden.cols())
    throw DimensionError("cbpa backward: d_vector " + d_vector.shape_string());
  if (!d_weights.empty() && d_weights.size() != n)
    throw DimensionError("cbpa backward: " + std::to_string(d_weights.size()) +
                         " weight grads for " + std::to_string(n) + " patches");

  std::vector<double> d_alpha(n);
  for (std::size_t k = 0; k < n; ++k)
    d_alpha[k] = dot(d_vector.row(0), t.hidden.row(k)) + (d_weights.empty() ? 0.0 : d_weights[k]);
  const auto d_scores = softmax_input_grad(t.weights, d_alpha);

  AggregatorGrad g;
  auto score_g = backward(net.score, t.gated, Matrix::column_vector(d_scores));
  const Matrix tanh_out = forward(Tanh{}, t.tanh_pre);
  const Matrix sig_out = forward(Sigmoid{}, t.sigmoid_pre);
  const Matrix d_tanh_pre = backward(Tanh{}, t.tanh_pre, hadamard(score_g.input, sig_out)).input;
  const Matrix d_sig_pre =
      backward(Sigmoid{}, t.sigmoid_pre, hadamard(score_g.input, tanh_out)).input;
  auto tanh_g = backward(net.attention_tanh, t.hidden, d_tanh_pre);
  auto sig_g = backward(net.attention_sigmoid, t.hidden, d_sig_pre);

  Matrix d_hidden = matmul(Matrix::column_vector(t.weights), d_vector);
  d_hidden += tanh_g.input;
  d_hidden += sig_g.input;
  auto fc_g = backward(net.fc, patches, d_hidden);

  g.params.fc = std::move(fc_g.params);
  g.params.attention_tanh = std::move(tanh_g.params);
  g.params.attention_sigmoid = std::move(sig_g.params);
  g.params.score = std::move(score_g.params);
  g.patches = std::move(fc_g.input);
  return g;
}

ProjectorDims VisionProjector::dims() const {
  return {pooler.key_proj.in_dim(), pooler.query.cols(), mlp_in.out_dim(), mlp_out.out_dim()};
}

ParamList VisionProjector::params() {
  ParamList out{{"projector.pooler.query", pooler.query}};
  append(out, pooler.query_proj.params("projector.pooler.query_proj"));
  append(out, pooler.key_proj.params("projector.pooler.key_proj"));
  append(out, pooler.value_proj.params("projector.pooler.value_proj"));
  append(out, pooler.out_proj.params("projector.pooler.out_proj"));
  append(out, norm.params("projector.norm"));
  append(out, mlp_in.params("projector.mlp_in"));
  append(out, mlp_out.params("projector.mlp_out"));
  return out;
}

VisionProjector make_projector(const ProjectorDims& dims, Rng& rng) {
  if (dims.input == 0 || dims.model == 0 || dims.hidden == 0 || dims.output == 0)
    throw ConfigError("projector: dims must be positive");
  VisionProjector p;
  p.pooler.query = Matrix::uniform(1, dims.model, 1.0 / std::sqrt(double(dims.model)), rng);
  p.pooler.query_proj = make_linear(dims.model, dims.model, rng);
  p.pooler.key_proj = make_linear(dims.input, dims.model, rng);
  p.pooler.value_proj = make_linear(dims.input, dims.model, rng);
  p.pooler.out_proj = make_linear(dims.model, dims.model, rng);
  p.norm = make_layer_norm(dims.model);
  p.mlp_in = make_linear(dims.model, dims.hidden, rng);
  p.mlp_out = make_linear(dims.hidden, dims.output, rng);
  return p;
}

Projection project(const VisionProjector& projector, const Matrix& tokens) {
  auto t = trace_pooler(projector.pooler, tokens);
  const Matrix normed = forward(projector.norm, t.pooled);
  Matrix out = forward(projector.mlp_out, forward(Gelu{}, forward(projector.mlp_in, normed)));
  return {std::move(out), std::move(t.weights)};
}

Projection project(const VisionProjector& projector, const SlideEmbedding& slide) {
  return project(projector, slide.vector);
}

ProjectorGrad project_backward(const VisionProjector& projector, const Matrix& tokens,
                               const Matrix& d_output) {
  const auto& pool = projector.pooler;
  const auto t = trace_pooler(pool, tokens);
  const Matrix normed = forward(projector.norm, t.pooled);
  const Matrix pre_gelu = forward(projector.mlp_in, normed);
  const Matrix act = forward(Gelu{}, pre_gelu);
  if (d_output.rows() != 1 || d_output.cols() != projector.mlp_out.out_dim())
    throw DimensionError("projector backward: d_output " + d_output.shape_string());

  ProjectorGrad g;
  auto out_g = backward(projector.mlp_out, act, d_output);
  const Matrix d_pre = backward(Gelu{}, pre_gelu, out_g.input).input;
  auto in_g = backward(projector.mlp_in, normed, d_pre);
  auto norm_g = backward(projector.norm, t.pooled, in_g.input);
  auto o_g = backward(pool.out_proj, t.context, norm_g.input);

  // context = Σ_k w_k · values_k
  const Matrix& d_context = o_g.input;
  std::vector<double> d_w(tokens.rows());
  for (std::size_t k = 0; k < tokens.rows(); ++k) d_w[k] = dot(d_context.row(0), t.values.row(k));
  const Matrix d_values = matmul(Matrix::column_vector(t.weights), d_context);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(t.q.cols()));
  Matrix d_s = Matrix::row_vector(softmax_input_grad(t.weights, d_w));
  d_s *= inv_sqrt;
  const Matrix d_q = matmul(d_s, t.keys);
  const Matrix d_keys = matmul_tn(d_s, t.q);

  auto q_g = backward(pool.query_proj, pool.query, d_q);
  auto k_g = backward(pool.key_proj, tokens, d_keys);
  auto v_g = backward(pool.value_proj, tokens, d_values);

  g.params.pooler.query = std::move(q_g.input);
  g.params.pooler.query_proj = std::move(q_g.params);
  g.params.pooler.key_proj = std::move(k_g.params);
  g.params.pooler.value_proj = std::move(v_g.params);
  g.params.pooler.out_proj = std::move(o_g.params);
  g.params.norm = std::move(norm_g.params);
  g.params.mlp_in = std::move(in_g.params);
  g.params.mlp_out = std::move(out_g.params);
  g.tokens = k_g.input + v_g.input;
  return g;
}

TowerDims VisionTower::dims() const {
  const auto p = projector.dims();
  return {aggregator.dims(), p.model, p.hidden, p.output};
}

ParamList VisionTower::params() {
  ParamList out = aggregator.params();
  append(out, projector.params());
  return out;
}

VisionTower make_tower(const TowerDims& dims, Rng& rng) {
  VisionTower t;
  t.aggregator = make_gated_attention(dims.aggregator, rng);
  t.projector = make_projector(dims.projector(), rng);
  return t;
}

TowerOutput tower_forward(const VisionTower& tower, const Matrix& patches) {
  TowerOutput out;
  out.slide = cbpa_forward(tower.aggregator, patches);
  out.projection = project(tower.projector, out.slide);
  return out;
}

TowerGrad tower_backward(const VisionTower& tower, const Matrix& patches,
                         const Matrix& d_output) {
  const SlideEmbedding slide = cbpa_forward(tower.aggregator, patches);
  auto proj_g = project_backward(tower.projector, slide.vector, d_output);
  auto agg_g = cbpa_backward(tower.aggregator, patches, proj_g.tokens);
  TowerGrad g;
  g.params.aggregator = std::move(agg_g.params);
  g.params.projector = std::move(proj_g.params);
  g.patches = std::move(agg_g.patches);
  return g;
}

}  // namespace slidekit::vision
