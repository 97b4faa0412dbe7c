// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "slidekit/numerics/layers.hpp"

namespace slidekit::vision {

struct AggregatorDims {
  std::size_t input = 512;
  std::size_t hidden = 512;
  std::size_t attention = 256;
};

/// CLAM-style gated attention aggregator:
///   h_k = fc(x_k)
///   score_k = score(tanh(attention_tanh(h_k)) ⊙ sigmoid(attention_sigmoid(h_k)))
///   weights = softmax(scores),  slide = Σ_k weights_k · h_k
struct GatedAttentionNet {
  Linear fc;
  Linear attention_tanh;
  Linear attention_sigmoid;
  Linear score;

  AggregatorDims dims() const;
  ParamList params();
};

GatedAttentionNet make_gated_attention(const AggregatorDims& dims, Rng& rng);

struct SlideEmbedding {
  Matrix vector;                          // 1×hidden
  std::vector<double> attention_weights;  // one per patch, sums to 1
};

/// Pre-softmax attention score per patch (N entries).
std::vector<double> attention_scores(const GatedAttentionNet& net, const Matrix& patches);

/// Throws EmptyBagError for zero patches and DimensionError on width mismatch.
SlideEmbedding cbpa_forward(const GatedAttentionNet& net, const Matrix& patches);

struct AggregatorGrad {
  GatedAttentionNet params;
  Matrix patches;
};

/// Gradient given the upstream gradient of the slide vector and, optionally,
/// of the attention weights (empty span = no loss on the weights).
AggregatorGrad cbpa_backward(const GatedAttentionNet& net, const Matrix& patches,
                             const Matrix& d_vector, std::span<const double> d_weights = {});

struct ProjectorDims {
  std::size_t input = 512;
  std::size_t model = 512;
  std::size_t hidden = 4096;
  std::size_t output = 4096;
};

/// Single learned query attending over the input tokens, with q/k/v/output
/// projections. A single input token always receives weight exactly 1.
struct AttentionPooler {
  Matrix query;  // 1×model
  Linear query_proj;
  Linear key_proj;
  Linear value_proj;
  Linear out_proj;
};

/// pooler → layer norm → linear → GELU → linear
struct VisionProjector {
  AttentionPooler pooler;
  LayerNorm norm;
  Linear mlp_in;
  Linear mlp_out;

  ProjectorDims dims() const;
  ParamList params();
};

VisionProjector make_projector(const ProjectorDims& dims, Rng& rng);

struct Projection {
  Matrix output;                     // 1×output
  std::vector<double> pool_weights;  // one per input token
};

/// `tokens` is N×input; the slide overload feeds the single slide vector.
Projection project(const VisionProjector& projector, const Matrix& tokens);
Projection project(const VisionProjector& projector, const SlideEmbedding& slide);

struct ProjectorGrad {
  VisionProjector params;
  Matrix tokens;
};

ProjectorGrad project_backward(const VisionProjector& projector, const Matrix& tokens,
                               const Matrix& d_output);

struct TowerDims {
  AggregatorDims aggregator;
  std::size_t projector_model = 512;
  std::size_t projector_hidden = 4096;
  std::size_t output = 4096;

  ProjectorDims projector() const {
    return {aggregator.hidden, projector_model, projector_hidden, output};
  }
};

/// The trainable vision path: patch embeddings → slide embedding → LLM space.
struct VisionTower {
  GatedAttentionNet aggregator;
  VisionProjector projector;

  TowerDims dims() const;
  ParamList params();
};

VisionTower make_tower(const TowerDims& dims, Rng& rng);

struct TowerOutput {
  SlideEmbedding slide;
  Projection projection;
};

TowerOutput tower_forward(const VisionTower& tower, const Matrix& patches);

struct TowerGrad {
  VisionTower params;
  Matrix patches;
};

TowerGrad tower_backward(const VisionTower& tower, const Matrix& patches, const Matrix& d_output);

/// Copy of `model` with every parameter set to zero. Works for any type
/// exposing params().
template <class Model>
Model zeros_like(const Model& model) {
  Model copy = model;
  for (auto& p : copy.params()) {
    Matrix& m = p.value.get();
    m = Matrix(m.rows(), m.cols());
  }
  return copy;
}

/// Writes one CXPM file per parameter plus `shapes.json`.
void save_checkpoint(const std::string& dir, VisionTower tower);
/// Validates the descriptor, every tensor shape, and finiteness.
VisionTower load_checkpoint(const std::string& dir);

}  // namespace slidekit::vision
