// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/numerics/optim.hpp"

#include <cmath>
#include <numbers>

#include "slidekit/error.hpp"

namespace slidekit {

void adam_step(const ParamList& params, const ParamList& grads, AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw DimensionError("adam: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " grads");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != grads[i].name)
      throw DimensionError("adam: param '" + params[i].name + "' paired with grad '" +
                           grads[i].name + "'");
    require_same_shape(params[i].value.get(), grads[i].value.get(), params[i].name.c_str());
    if (!grads[i].value.get().all_finite())
      throw TrainingError("adam: non-finite gradient for parameter '" + params[i].name + "'");
  }

  ++state.step_count;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params[i].value.get();
    const Matrix& g = grads[i].value.get();
    auto [m_it, m_new] = state.first_moment.try_emplace(params[i].name, p.rows(), p.cols());
    auto [v_it, v_new] = state.second_moment.try_emplace(params[i].name, p.rows(), p.cols());
    auto m = m_it->second.values();
    auto v = v_it->second.values();
    if (m.size() != p.size() || v.size() != p.size())
      throw DimensionError("adam: moment shape changed for '" + params[i].name + "'");
    auto pv = p.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gv[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gv[k] * gv[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      pv[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

std::size_t ScheduleConfig::warmup_steps() const {
  return static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
}

double cosine_warmup_lr(std::size_t step, const ScheduleConfig& cfg) {
  if (cfg.total_steps < 1) throw ConfigError("schedule: total_steps must be >= 1");
  if (cfg.warmup_ratio < 0.0 || cfg.warmup_ratio > 1.0)
    throw ConfigError("schedule: warmup_ratio must be in [0, 1]");
  if (step > cfg.total_steps)
    throw RangeError("schedule: step " + std::to_string(step) + " beyond total_steps " +
                     std::to_string(cfg.total_steps));
  const std::size_t warmup = cfg.warmup_steps();
  if (step < warmup)
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (cfg.total_steps == warmup) return cfg.peak_lr;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(cfg.total_steps - warmup);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace slidekit
