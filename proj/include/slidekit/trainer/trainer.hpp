// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slidekit/numerics/lora.hpp"
#include "slidekit/numerics/optim.hpp"
#include "slidekit/prompts.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::trainer {

enum class Objective { contrastive, token_ce };
std::string_view to_string(Objective o);
Objective parse_objective(std::string_view text);

inline constexpr double kContrastiveTemperature = 0.07;

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::size_t grad_accumulation = 2;
  /// total_steps is derived from the data by the training loops.
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  Objective objective = Objective::contrastive;
  double temperature = kContrastiveTemperature;
  AdamConfig adam;

  std::size_t effective_batch() const noexcept { return batch_size * grad_accumulation; }
  /// epochs × ceil(examples / effective_batch)
  std::size_t total_steps(std::size_t examples) const;
  void validate() const;
};

/// Example indices for every optimizer step: each epoch is a seeded
/// Fisher-Yates shuffle cut into effective batches, last partial batch kept.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t examples, const TrainConfig& cfg);

struct LossPoint {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

/// CSV with header "step,lr,loss"; values use round-trip precision.
std::string loss_trace_csv(const std::vector<LossPoint>& trace);
void save_loss_trace(const std::string& path, const std::vector<LossPoint>& trace);

// ---------------------------------------------------------------- alignment

struct AlignmentPair {
  std::string slide_id;
  Matrix patch_embeddings;  // N×D
  std::vector<double> target_embedding;
  /// Caption token ids for the token_ce objective.
  std::vector<std::size_t> caption_tokens;

  /// Throws InputError for an empty bag or a non-finite / zero target.
  void validate() const;
};

/// Frozen linear read-out from the projector output to a vocabulary.
struct LinearDecoder {
  Linear head;  // vocab×output
};

LinearDecoder make_linear_decoder(std::size_t output_dim, std::size_t vocab, Rng& rng);

struct AlignmentResult {
  vision::VisionTower tower;
  std::vector<LossPoint> trace;
};

/// Trains the aggregator and projector. Contrastive: info_nce between the
/// projected slide vectors and the targets of each micro-batch. token_ce:
/// mean cross-entropy of `decoder` over every caption token. A non-finite
/// loss raises TrainingError naming the step.
AlignmentResult train_alignment(const std::vector<AlignmentPair>& pairs, vision::VisionTower tower,
                                const TrainConfig& cfg, const LinearDecoder* decoder = nullptr);

/// Loss and summed tower gradient of one micro-batch.
struct AlignmentBatchGrad {
  double loss = 0.0;
  vision::VisionTower grad;
};

AlignmentBatchGrad alignment_batch_gradient(const vision::VisionTower& tower,
                                            const std::vector<AlignmentPair>& pairs,
                                            std::span<const std::size_t> batch,
                                            const TrainConfig& cfg,
                                            const LinearDecoder* decoder = nullptr);

/// Fraction of pairs whose projected slide vector has its own target as the
/// cosine nearest neighbour among all targets (ties go to the lower index).
double top1_retrieval(const vision::VisionTower& tower, const std::vector<AlignmentPair>& pairs);

struct SyntheticAlignmentSpec {
  std::size_t pairs = 32;
  std::size_t patches = 16;
  std::size_t input_dim = 8;
  std::size_t target_dim = 16;
  /// Seed of the fixed linear map; shared between train and held-out sets.
  std::uint64_t map_seed = 1;
};

/// Gaussian patch bags with target = M · mean(patches) for a fixed map M.
std::vector<AlignmentPair> synthetic_alignment_pairs(const SyntheticAlignmentSpec& spec,
                                                     std::uint64_t seed);

// ------------------------------------------------------------------ dialogue

struct DialogueTemplate {
  std::string system_prompt{prompts::kInstructionTuning};
  std::string begin = "<s>";
  std::string end = "</s>";
  std::string inst_open = "[INST]";
  std::string inst_close = "[/INST]";
  std::string sys_open = "<<SYS>>";
  std::string sys_close = "<</SYS>>";
};

/// "<s>[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{user} [/INST] {assistant}</s>";
/// without an assistant (or with an empty one) the text ends at "[/INST]".
/// Any marker inside an input raises EscapingError.
std::string format_dialogue(const DialogueTemplate& t, std::string_view system,
                            std::string_view user,
                            const std::optional<std::string>& assistant = std::nullopt);

struct Dialogue {
  std::string system;
  std::string user;
  std::optional<std::string> assistant;
  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Inverse of format_dialogue; FormatError if the text does not follow it.
Dialogue parse_dialogue(const DialogueTemplate& t, std::string_view text);

// ---------------------------------------------------------- instruction toy

/// Whitespace word vocabulary. Id 0 is "<unk>", 1 is "</s>".
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static constexpr std::size_t kEnd = 1;

  Vocabulary();
  /// Every distinct word of `texts`, in sorted order after the specials.
  static Vocabulary build(const std::vector<std::string>& texts);

  std::vector<std::size_t> encode(std::string_view text) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t, std::less<>> ids_;
};

/// Loss covers predictions of tokens[loss_start..end).
struct TokenizedExample {
  std::vector<std::size_t> tokens;
  std::size_t loss_start = 1;

  std::size_t target_count() const noexcept { return tokens.size() - loss_start; }
};

/// Prompt = dialogue without assistant; targets = answer words then "</s>".
std::vector<TokenizedExample> tokenize_records(const std::vector<raider::InstructionRecord>& records,
                                               const Vocabulary& vocab,
                                               const DialogueTemplate& t = {});

/// Vocabulary over the rendered prompts and the answers of `records`.
Vocabulary records_vocabulary(const std::vector<raider::InstructionRecord>& records,
                              const DialogueTemplate& t = {});

struct ToyDecoderDims {
  std::size_t vocab = 0;
  std::size_t dim = 64;
  std::size_t max_positions = 512;
};

/// Per position t: x_t = E[tok_t] + P[t] + mean(E[tok_0..t]),
/// logits_t = head(tanh(proj(x_t))). Embeddings and both base layers are
/// frozen; only the LoRA adapters on proj and head train.
struct ToyDecoder {
  Matrix token_embedding;     // vocab×dim
  Matrix position_embedding;  // max_positions×dim
  LoraLinear proj;
  LoraLinear head;

  ToyDecoderDims dims() const;
  ParamList base_params();
  ParamList trainable_params();
};

ToyDecoder make_toy_decoder(const ToyDecoderDims& dims, const LoraConfig& lora, Rng& rng);

/// SHA-256 over every frozen tensor.
std::string base_weight_hash(const ToyDecoder& decoder);

/// Inputs x_t for the given positions (rows in order).
Matrix toy_inputs(const ToyDecoder& decoder, std::span<const std::size_t> tokens,
                  std::span<const std::size_t> positions);

/// Eval-mode logits (no dropout) for every position but the last.
Matrix toy_logits(const ToyDecoder& decoder, std::span<const std::size_t> tokens);
/// The same network with the adapters removed.
Matrix toy_base_logits(const ToyDecoder& decoder, std::span<const std::size_t> tokens);
/// Adapters folded into the base layers and reset to zero.
ToyDecoder merge_adapters(const ToyDecoder& decoder);

/// Token-weighted loss and adapter gradient over `batch`, processed in
/// micro-batches of `micro_batch` examples. Sums are divided by the target
/// count of the whole batch, so the split does not change the result beyond
/// rounding. Dropout masks depend only on (seed, step, example index).
struct ToyGradient {
  double loss = 0.0;
  std::size_t tokens = 0;
  std::vector<Matrix> grads;  // order of trainable_params()
};

ToyGradient toy_gradient(const ToyDecoder& decoder, const std::vector<TokenizedExample>& examples,
                         std::span<const std::size_t> batch, std::size_t micro_batch,
                         std::uint64_t seed, std::size_t step, bool dropout = true);

struct InstructionResult {
  ToyDecoder decoder;
  std::vector<LossPoint> trace;
};

/// LoRA instruction tuning of the toy decoder. The frozen weights are hashed
/// before and after; any difference raises IntegrityError.
InstructionResult train_instruction_toy(const std::vector<TokenizedExample>& examples,
                                        ToyDecoder decoder, const TrainConfig& cfg);

}  // namespace slidekit::trainer
