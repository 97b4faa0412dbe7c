// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/numerics/losses.hpp"
#include "slidekit/trainer/trainer.hpp"

namespace slidekit::trainer {
namespace {

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

template <class Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) fn(text.substr(start, i - start));
  }
}

Matrix tanh_of(Matrix m) {
  for (double& v : m.values()) v = std::tanh(v);
  return m;
}

}  // namespace

Vocabulary::Vocabulary() : words_{"<unk>", "</s>"} {
  ids_.emplace(words_[0], kUnknown);
  ids_.emplace(words_[1], kEnd);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string, std::less<>> words;
  for (const auto& t : texts) for_each_word(t, [&](std::string_view w) { words.emplace(w); });
  Vocabulary v;
  for (const auto& w : words) {
    if (v.ids_.count(w)) continue;
    v.ids_.emplace(w, v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for_each_word(text, [&](std::string_view w) {
    const auto it = ids_.find(w);
    ids.push_back(it == ids_.end() ? kUnknown : it->second);
  });
  return ids;
}

Vocabulary records_vocabulary(const std::vector<raider::InstructionRecord>& records,
                              const DialogueTemplate& t) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    texts.push_back(format_dialogue(t, t.system_prompt, r.question));
    texts.push_back(r.answer);
  }
  return Vocabulary::build(texts);
}

std::vector<TokenizedExample> tokenize_records(const std::vector<raider::InstructionRecord>& records,
                                               const Vocabulary& vocab, const DialogueTemplate& t) {
  std::vector<TokenizedExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TokenizedExample ex;
    ex.tokens = vocab.encode(format_dialogue(t, t.system_prompt, r.question));
    ex.loss_start = ex.tokens.size();
    for (std::size_t id : vocab.encode(r.answer)) ex.tokens.push_back(id);
    ex.tokens.push_back(Vocabulary::kEnd);
    out.push_back(std::move(ex));
  }
  return out;
}

ToyDecoderDims ToyDecoder::dims() const {
  return {token_embedding.rows(), token_embedding.cols(), position_embedding.rows()};
}

ParamList ToyDecoder::base_params() {
  return {{"token_embedding", token_embedding},
          {"position_embedding", position_embedding},
          {"proj.weight", proj.base.weight},
          {"proj.bias", proj.base.bias},
          {"head.weight", head.base.weight},
          {"head.bias", head.base.bias}};
}

ParamList ToyDecoder::trainable_params() {
  auto p = proj.trainable_params("proj");
  for (auto& r : head.trainable_params("head")) p.push_back(std::move(r));
  return p;
}

ToyDecoder make_toy_decoder(const ToyDecoderDims& dims, const LoraConfig& lora, Rng& rng) {
  if (dims.vocab == 0 || dims.dim == 0 || dims.max_positions == 0)
    throw ConfigError("toy decoder sizes must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dims.dim));
  ToyDecoder d;
  d.token_embedding = Matrix::normal(dims.vocab, dims.dim, scale, rng);
  d.position_embedding = Matrix::normal(dims.max_positions, dims.dim, scale, rng);
  d.proj = make_lora(make_linear(dims.dim, dims.dim, rng), lora, rng);
  d.head = make_lora(make_linear(dims.dim, dims.vocab, rng), lora, rng);
  return d;
}

std::string base_weight_hash(const ToyDecoder& decoder) {
  std::vector<double> all;
  for (const Matrix* m : {&decoder.token_embedding, &decoder.position_embedding,
                          &decoder.proj.base.weight, &decoder.proj.base.bias,
                          &decoder.head.base.weight, &decoder.head.base.bias})
    all.insert(all.end(), m->values().begin(), m->values().end());
  return sha256_hex(std::span<const double>(all));
}

Matrix toy_inputs(const ToyDecoder& decoder, std::span<const std::size_t> tokens,
                  std::span<const std::size_t> positions) {
  const std::size_t dim = decoder.token_embedding.cols();
  const std::size_t last = positions.empty() ? 0 : *std::max_element(positions.begin(), positions.end());
  if (!positions.empty() && last >= tokens.size())
    throw IndexError(fmt::format("position {} outside a {}-token sequence", last, tokens.size()));
  if (!positions.empty() && last >= decoder.position_embedding.rows())
    throw InputError(fmt::format("sequence position {} exceeds the decoder limit {}", last,
                                 decoder.position_embedding.rows()));

  // prefix[t] = mean of the embeddings of tokens 0..t
  std::vector<std::vector<double>> prefix;
  std::vector<double> running(dim, 0.0);
  for (std::size_t t = 0; !positions.empty() && t <= last; ++t) {
    if (tokens[t] >= decoder.token_embedding.rows())
      throw IndexError(fmt::format("token id {} outside vocabulary {}", tokens[t],
                                   decoder.token_embedding.rows()));
    const auto e = decoder.token_embedding.row(tokens[t]);
    std::vector<double> mean(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      running[c] += e[c];
      mean[c] = running[c] / static_cast<double>(t + 1);
    }
    prefix.push_back(std::move(mean));
  }

  Matrix x(positions.size(), dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const std::size_t t = positions[r];
    const auto e = decoder.token_embedding.row(tokens[t]);
    const auto p = decoder.position_embedding.row(t);
    for (std::size_t c = 0; c < dim; ++c) x(r, c) = e[c] + p[c] + prefix[t][c];
  }
  return x;
}

namespace {

std::vector<std::size_t> all_positions(std::span<const std::size_t> tokens) {
  std::vector<std::size_t> pos(tokens.size() < 2 ? 0 : tokens.size() - 1);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  return pos;
}

}  // namespace

Matrix toy_logits(const ToyDecoder& decoder, std::span<const std::size_t> tokens) {
  const Matrix x = toy_inputs(decoder, tokens, all_positions(tokens));
  return lora_forward(decoder.head, tanh_of(lora_forward(decoder.proj, x)));
}

Matrix toy_base_logits(const ToyDecoder& decoder, std::span<const std::size_t> tokens) {
  const Matrix x = toy_inputs(decoder, tokens, all_positions(tokens));
  return forward(decoder.head.base, tanh_of(forward(decoder.proj.base, x)));
}

ToyDecoder merge_adapters(const ToyDecoder& decoder) {
  ToyDecoder merged = decoder;
  for (LoraLinear* l : {&merged.proj, &merged.head}) {
    l->base = lora_merge(*l);
    l->up = Matrix(l->up.rows(), l->up.cols());
  }
  return merged;
}

ToyGradient toy_gradient(const ToyDecoder& decoder, const std::vector<TokenizedExample>& examples,
                         std::span<const std::size_t> batch, std::size_t micro_batch,
                         std::uint64_t seed, std::size_t step, bool dropout) {
  if (micro_batch == 0) throw ConfigError("micro batch size must be >= 1");
  ToyGradient out;
  out.grads = {Matrix(decoder.proj.down.rows(), decoder.proj.down.cols()),
               Matrix(decoder.proj.up.rows(), decoder.proj.up.cols()),
               Matrix(decoder.head.down.rows(), decoder.head.down.cols()),
               Matrix(decoder.head.up.rows(), decoder.head.up.cols())};
  for (std::size_t idx : batch) {
    const auto& ex = examples.at(idx);
    if (ex.loss_start == 0 || ex.loss_start >= ex.tokens.size())
      throw InputError(fmt::format("example {} has no target tokens", idx));
    out.tokens += ex.target_count();
  }
  if (out.tokens == 0) return out;
  const double inv_tokens = 1.0 / static_cast<double>(out.tokens);
  const std::size_t dim = decoder.token_embedding.cols();

  for (std::size_t begin = 0; begin < batch.size(); begin += micro_batch) {
    const auto micro = batch.subspan(begin, std::min(micro_batch, batch.size() - begin));
    std::vector<Matrix> xs, proj_masks, head_masks;
    std::vector<std::size_t> targets;
    for (std::size_t idx : micro) {
      const auto& ex = examples[idx];
      std::vector<std::size_t> positions;
      for (std::size_t t = ex.loss_start - 1; t + 1 < ex.tokens.size(); ++t) {
        positions.push_back(t);
        targets.push_back(ex.tokens[t + 1]);
      }
      xs.push_back(toy_inputs(decoder, ex.tokens, positions));
      Rng rng(stable_hash64(fmt::format("lora-dropout:{}:{}:{}", seed, step, idx)));
      proj_masks.push_back(dropout_mask(positions.size(), dim, dropout ? decoder.proj.dropout : 0.0, rng));
      head_masks.push_back(dropout_mask(positions.size(), dim, dropout ? decoder.head.dropout : 0.0, rng));
    }
    const Matrix x = vstack(xs);
    const Matrix proj_mask = vstack(proj_masks);
    const Matrix head_mask = vstack(head_masks);

    const Matrix h = tanh_of(lora_forward(decoder.proj, x, &proj_mask));
    const Matrix logits = lora_forward(decoder.head, h, &head_mask);
    auto ce = cross_entropy_sum(logits, targets);
    out.loss += ce.loss * inv_tokens;
    ce.grad *= inv_tokens;

    const auto g_head = lora_backward(decoder.head, h, ce.grad, &head_mask);
    Matrix d_pre = g_head.input;
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      const double hv = h.values()[i];
      d_pre.values()[i] *= 1.0 - hv * hv;
    }
    const auto g_proj = lora_backward(decoder.proj, x, d_pre, &proj_mask);
    out.grads[0] += g_proj.down;
    out.grads[1] += g_proj.up;
    out.grads[2] += g_head.down;
    out.grads[3] += g_head.up;
  }
  return out;
}

InstructionResult train_instruction_toy(const std::vector<TokenizedExample>& examples,
                                        ToyDecoder decoder, const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw InputError("instruction tuning needs at least one example");
  const std::string base_hash = base_weight_hash(decoder);
  const auto plan = batch_plan(examples.size(), cfg);
  ScheduleConfig schedule = cfg.schedule;
  schedule.total_steps = plan.size();
  AdamState adam{cfg.adam, 0, {}, {}};

  InstructionResult result;
  for (std::size_t step = 0; step < plan.size(); ++step) {
    auto g = toy_gradient(decoder, examples, plan[step], cfg.batch_size, cfg.seed, step);
    if (!std::isfinite(g.loss))
      throw TrainingError(fmt::format("instruction tuning: non-finite loss at step {}", step));
    const double lr = cosine_warmup_lr(step, schedule);
    result.trace.push_back({step, lr, g.loss});
    spdlog::debug("instruct step {} lr {:.3e} loss {:.6f}", step, lr, g.loss);
    auto params = decoder.trainable_params();
    ParamList grads;
    for (std::size_t i = 0; i < params.size(); ++i) grads.push_back({params[i].name, g.grads[i]});
    adam_step(params, grads, adam, lr);
  }
  if (base_weight_hash(decoder) != base_hash)
    throw IntegrityError("instruction tuning modified frozen decoder weights");
  result.decoder = std::move(decoder);
  return result;
}

}  // namespace slidekit::trainer
