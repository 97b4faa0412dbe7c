// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "slidekit/numerics/matrix.hpp"

namespace slidekit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators keyed by parameter name. Moments are
/// created lazily (zero) the first time a parameter is stepped.
struct AdamState {
  AdamConfig config;
  std::size_t step_count = 0;
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;
};

/// One bias-corrected Adam update applied in place. `grads` must pair with
/// `params` by position and name. A non-finite gradient raises TrainingError
/// naming the parameter, before any parameter is touched.
void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr);

struct ScheduleConfig {
  double peak_lr = 2e-3;
  std::size_t total_steps = 1;
  double warmup_ratio = 0.03;

  /// ceil(warmup_ratio × total_steps)
  std::size_t warmup_steps() const;
};

inline constexpr double kPhase1PeakLr = 2e-3;
inline constexpr double kPhase2PeakLr = 2e-5;

/// Linear warmup from 0 at step 0 to peak at warmup_steps(), then cosine
/// decay to 0 at total_steps. Steps are 0-based; step > total_steps is a
/// RangeError.
double cosine_warmup_lr(std::size_t step, const ScheduleConfig& cfg);

}  // namespace slidekit
