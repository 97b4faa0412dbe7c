// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/numerics/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slidekit/error.hpp"
#include "slidekit/numerics/layers.hpp"

namespace slidekit {

void GenerationConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("generation: temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("generation: top_p must be in (0, 1]");
  if (top_k < 1) throw ConfigError("generation: top_k must be >= 1");
}

std::vector<double> sample_filter(std::span<const double> logits, const GenerationConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order;
  order.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i]) || logits[i] == INFINITY)
      throw DegenerateError("sample_filter: NaN or +inf logit");
    if (logits[i] != -INFINITY) order.push_back(i);
  }
  if (order.empty()) throw DegenerateError("sample_filter: no finite logit");

  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  order.resize(std::min(order.size(), cfg.top_k));

  std::vector<double> kept(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) kept[i] = logits[order[i]] / cfg.temperature;
  const std::vector<double> probs = softmax(kept);

  std::size_t prefix = 0;
  double mass = 0.0;
  while (prefix < probs.size()) {
    mass += probs[prefix++];
    if (mass >= cfg.top_p - kTopPTolerance) break;
  }

  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t i = 0; i < prefix; ++i) out[order[i]] = probs[i] / mass;
  return out;
}

}  // namespace slidekit
