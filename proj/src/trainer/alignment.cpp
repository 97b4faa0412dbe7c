// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/numerics/losses.hpp"
#include "slidekit/trainer/trainer.hpp"

namespace slidekit::trainer {

std::string_view to_string(Objective o) {
  return o == Objective::contrastive ? "contrastive" : "token_ce";
}

Objective parse_objective(std::string_view text) {
  if (text == "contrastive") return Objective::contrastive;
  if (text == "token_ce") return Objective::token_ce;
  throw ConfigError("unknown objective '" + std::string(text) +
                    "' (expected contrastive or token_ce)");
}

std::size_t TrainConfig::total_steps(std::size_t examples) const {
  const std::size_t eff = effective_batch();
  return eff == 0 ? 0 : epochs * ((examples + eff - 1) / eff);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (grad_accumulation == 0) throw ConfigError("grad_accumulation must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
  if (!(schedule.peak_lr >= 0.0) || !std::isfinite(schedule.peak_lr))
    throw ConfigError("peak learning rate must be finite and >= 0");
  if (!(schedule.warmup_ratio >= 0.0 && schedule.warmup_ratio <= 1.0))
    throw ConfigError("warmup_ratio must lie in [0, 1]");
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t examples, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::size_t>> plan;
  const std::size_t eff = cfg.effective_batch();
  std::vector<std::size_t> order(examples);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(stable_hash64(fmt::format("shuffle:{}:{}", cfg.seed, epoch)));
    for (std::size_t i = examples; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t start = 0; start < examples; start += eff)
      plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(std::min(start + eff, examples)));
  }
  return plan;
}

std::string loss_trace_csv(const std::vector<LossPoint>& trace) {
  std::string out = "step,lr,loss\n";
  for (const auto& p : trace) out += fmt::format("{},{:.17g},{:.17g}\n", p.step, p.lr, p.loss);
  return out;
}

void save_loss_trace(const std::string& path, const std::vector<LossPoint>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write loss trace '" + path + "'");
  out << loss_trace_csv(trace);
}

void AlignmentPair::validate() const {
  if (patch_embeddings.rows() == 0)
    throw InputError("alignment pair '" + slide_id + "' has no patches");
  if (target_embedding.empty()) throw InputError("alignment pair '" + slide_id + "' has no target");
  double norm = 0.0;
  for (double v : target_embedding) {
    if (!std::isfinite(v)) throw InputError("alignment pair '" + slide_id + "' has a non-finite target");
    norm += v * v;
  }
  if (norm == 0.0) throw InputError("alignment pair '" + slide_id + "' has a zero target");
}

LinearDecoder make_linear_decoder(std::size_t output_dim, std::size_t vocab, Rng& rng) {
  return {make_linear(output_dim, vocab, rng)};
}

namespace {

void add_into(vision::VisionTower& acc, vision::VisionTower grad, double scale) {
  auto dst = acc.params();
  auto src = grad.params();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Matrix& g = src[i].value.get();
    g *= scale;
    dst[i].value.get() += g;
  }
}

void check_pairs(const std::vector<AlignmentPair>& pairs, const vision::VisionTower& tower,
                 const TrainConfig& cfg, const LinearDecoder* decoder) {
  if (pairs.empty()) throw InputError("alignment needs at least one pair");
  const auto dims = tower.dims();
  for (const auto& p : pairs) {
    p.validate();
    if (p.patch_embeddings.cols() != dims.aggregator.input)
      throw DimensionError(fmt::format("pair '{}' has {}-dim patches, tower expects {}", p.slide_id,
                                       p.patch_embeddings.cols(), dims.aggregator.input));
    if (p.target_embedding.size() != pairs.front().target_embedding.size())
      throw DimensionError("alignment targets must share one dimension");
  }
  if (cfg.objective == Objective::contrastive) {
    if (pairs.front().target_embedding.size() != dims.output)
      throw DimensionError(fmt::format("targets are {}-dim but the projector outputs {}",
                                       pairs.front().target_embedding.size(), dims.output));
  } else {
    if (decoder == nullptr) throw ConfigError("token_ce objective needs a decoder");
    if (decoder->head.in_dim() != dims.output)
      throw DimensionError("decoder input does not match the projector output");
    for (const auto& p : pairs) {
      if (p.caption_tokens.empty())
        throw InputError("pair '" + p.slide_id + "' has no caption tokens");
      for (std::size_t t : p.caption_tokens)
        if (t >= decoder->head.out_dim())
          throw IndexError(fmt::format("pair '{}' caption token {} outside vocabulary {}",
                                       p.slide_id, t, decoder->head.out_dim()));
    }
  }
}

}  // namespace

AlignmentBatchGrad alignment_batch_gradient(const vision::VisionTower& tower,
                                            const std::vector<AlignmentPair>& pairs,
                                            std::span<const std::size_t> batch,
                                            const TrainConfig& cfg, const LinearDecoder* decoder) {
  AlignmentBatchGrad out{0.0, vision::zeros_like(tower)};
  const std::size_t out_dim = tower.dims().output;
  Matrix projected(batch.size(), out_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto fwd = vision::tower_forward(tower, pairs[batch[i]].patch_embeddings);
    std::copy(fwd.projection.output.values().begin(), fwd.projection.output.values().end(),
              projected.row(i).begin());
  }

  Matrix d_projected(batch.size(), out_dim);
  if (cfg.objective == Objective::contrastive) {
    Matrix targets(batch.size(), out_dim);
    for (std::size_t i = 0; i < batch.size(); ++i)
      std::copy(pairs[batch[i]].target_embedding.begin(), pairs[batch[i]].target_embedding.end(),
                targets.row(i).begin());
    auto r = info_nce(projected, targets, cfg.temperature);
    out.loss = r.loss;
    d_projected = std::move(r.grad_image);
  } else {
    std::size_t total_tokens = 0;
    for (std::size_t idx : batch) total_tokens += pairs[idx].caption_tokens.size();
    const Matrix logits = forward(decoder->head, projected);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& tokens = pairs[batch[i]].caption_tokens;
      std::vector<std::size_t> row_index(tokens.size(), i);
      const auto ce = cross_entropy_sum(select_rows(logits, row_index), tokens);
      out.loss += ce.loss / static_cast<double>(total_tokens);
      Matrix d_row = matmul(column_sums(ce.grad), decoder->head.weight);
      d_row *= 1.0 / static_cast<double>(total_tokens);
      std::copy(d_row.values().begin(), d_row.values().end(), d_projected.row(i).begin());
    }
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Matrix d_out = Matrix::row_vector(d_projected.row(i));
    add_into(out.grad, vision::tower_backward(tower, pairs[batch[i]].patch_embeddings, d_out).params,
             1.0);
  }
  return out;
}

AlignmentResult train_alignment(const std::vector<AlignmentPair>& pairs, vision::VisionTower tower,
                                const TrainConfig& cfg, const LinearDecoder* decoder) {
  cfg.validate();
  check_pairs(pairs, tower, cfg, decoder);
  const auto plan = batch_plan(pairs.size(), cfg);
  ScheduleConfig schedule = cfg.schedule;
  schedule.total_steps = plan.size();
  AdamState adam{cfg.adam, 0, {}, {}};

  AlignmentResult result;
  for (std::size_t step = 0; step < plan.size(); ++step) {
    const auto& batch = plan[step];
    const std::size_t micro_count = (batch.size() + cfg.batch_size - 1) / cfg.batch_size;
    vision::VisionTower grad = vision::zeros_like(tower);
    double loss = 0.0;
    for (std::size_t m = 0; m < micro_count; ++m) {
      const std::size_t begin = m * cfg.batch_size;
      const std::size_t len = std::min(cfg.batch_size, batch.size() - begin);
      AlignmentBatchGrad micro;
      try {
        micro = alignment_batch_gradient(
            tower, pairs, std::span<const std::size_t>(batch).subspan(begin, len), cfg, decoder);
      } catch (const DegenerateError& e) {
        throw TrainingError(fmt::format("alignment: degenerate output at step {}: {}", step, e.what()));
      }
      loss += micro.loss / static_cast<double>(micro_count);
      add_into(grad, std::move(micro.grad), 1.0 / static_cast<double>(micro_count));
    }
    if (!std::isfinite(loss))
      throw TrainingError(fmt::format("alignment: non-finite loss at step {}", step));
    const double lr = cosine_warmup_lr(step, schedule);
    result.trace.push_back({step, lr, loss});
    spdlog::debug("align step {} lr {:.3e} loss {:.6f}", step, lr, loss);
    adam_step(tower.params(), grad.params(), adam, lr);
  }
  result.tower = std::move(tower);
  return result;
}

double top1_retrieval(const vision::VisionTower& tower, const std::vector<AlignmentPair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<Matrix> projected;
  projected.reserve(pairs.size());
  for (const auto& p : pairs)
    projected.push_back(vision::tower_forward(tower, p.patch_embeddings).projection.output);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t best = 0;
    double best_sim = -2.0;
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const double sim = cosine_similarity(projected[i].values(), pairs[j].target_embedding);
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

std::vector<AlignmentPair> synthetic_alignment_pairs(const SyntheticAlignmentSpec& spec,
                                                     std::uint64_t seed) {
  if (spec.pairs == 0 || spec.patches == 0 || spec.input_dim == 0 || spec.target_dim == 0)
    throw ConfigError("synthetic alignment sizes must be positive");
  Rng map_rng(spec.map_seed);
  const Matrix map = Matrix::normal(spec.target_dim, spec.input_dim,
                                    1.0 / std::sqrt(static_cast<double>(spec.input_dim)), map_rng);
  Rng rng(seed);
  std::vector<AlignmentPair> pairs;
  pairs.reserve(spec.pairs);
  for (std::size_t i = 0; i < spec.pairs; ++i) {
    AlignmentPair p;
    p.slide_id = fmt::format("synthetic-{:04}", i + 1);
    p.patch_embeddings = Matrix::normal(spec.patches, spec.input_dim, 1.0, rng);
    Matrix mean = column_sums(p.patch_embeddings);
    mean *= 1.0 / static_cast<double>(spec.patches);
    const Matrix target = matmul_nt(mean, map);
    p.target_embedding.assign(target.values().begin(), target.values().end());
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace slidekit::trainer
