// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slidekit/llm/chat.hpp"
#include "slidekit/llm/mock.hpp"
#include "slidekit/numerics/sampling.hpp"

namespace slidekit::evaluator {

inline constexpr std::size_t kDefaultCandidates = 10;
/// Evaluator calls per step: the first try plus two retries.
inline constexpr int kEvaluatorAttempts = 3;

struct EvalCase {
  std::string case_id;
  std::string question;
  std::string reference_answer;
  std::vector<std::string> candidate_answers;

  /// Throws FormatError for an empty id, question or reference.
  void validate() const;
  friend bool operator==(const EvalCase&, const EvalCase&) = default;
};

enum class Decision { accept, reject, invalid };
std::string_view to_string(Decision d);
Decision parse_decision_name(std::string_view text);

struct EvalDecision {
  std::string case_id;
  /// Absent when no candidate could be chosen.
  std::optional<std::size_t> best_index;
  Decision decision = Decision::invalid;
  std::string selection_reasons;
  std::string judgement_reasons;
  /// Evaluator calls made for this case (selection and judgement).
  int attempts = 0;
  friend bool operator==(const EvalDecision&, const EvalDecision&) = default;
};

std::string to_json_line(const EvalCase& c);
EvalCase case_from_json(std::string_view line);
std::vector<EvalCase> load_cases(const std::string& path);
void save_cases(const std::string& path, const std::vector<EvalCase>& cases);

std::string to_json_line(const EvalDecision& d);
EvalDecision decision_from_json(std::string_view line);
std::vector<EvalDecision> load_decisions(const std::string& path);
void save_decisions(const std::string& path, const std::vector<EvalDecision>& decisions);

/// Where candidate answers come from.
class AnswerSource {
 public:
  virtual ~AnswerSource() = default;
  /// Exactly n answers or an exception.
  virtual std::vector<std::string> answers(const EvalCase& c, std::size_t n,
                                           const GenerationConfig& gen) const = 0;
};

/// One chat call per candidate with the instruction-tuning system prompt;
/// each call gets its own seed.
class ChatAnswerSource final : public AnswerSource {
 public:
  ChatAnswerSource(const llm::ChatClient& client, std::string model, std::uint64_t seed = 0);
  std::vector<std::string> answers(const EvalCase& c, std::size_t n,
                                   const GenerationConfig& gen) const override;

 private:
  const llm::ChatClient& client_;
  std::string model_;
  std::uint64_t seed_;
};

/// JSON Lines of {case_id, answers: [...]}. The first n answers are used.
class RecordedAnswerSource final : public AnswerSource {
 public:
  explicit RecordedAnswerSource(std::map<std::string, std::vector<std::string>> answers);
  static RecordedAnswerSource load(const std::string& path);
  std::vector<std::string> answers(const EvalCase& c, std::size_t n,
                                   const GenerationConfig& gen) const override;

 private:
  std::map<std::string, std::vector<std::string>> answers_;
};

/// Throws RangeError for n = 0; errors from the source propagate.
std::vector<std::string> collect_candidates(const EvalCase& c, const AnswerSource& source,
                                            std::size_t n = kDefaultCandidates,
                                            const GenerationConfig& gen = {});

/// Prompt asking for step-by-step reasoning and a final "BEST: <n>" line.
std::string build_selection_prompt(const EvalCase& c);
/// The seven-criteria judge prompt with question, reference and answer filled in.
std::string build_judge_prompt(std::string_view question, std::string_view reference,
                               std::string_view answer);

/// 1-based number from the last "BEST: <n>" in the reply, if any.
std::optional<std::size_t> parse_best(std::string_view reply);
/// Last whole-word, case-insensitive "accept" or "reject"; nullopt if neither.
std::optional<Decision> parse_decision(std::string_view reply);

struct EvaluatorOptions {
  std::string model = "evaluator";
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
  std::uint64_t seed = 0;
  int attempts = kEvaluatorAttempts;
};

struct Selection {
  std::optional<std::size_t> best_index;
  std::string reasons;
  int attempts = 0;
};

/// A single candidate is chosen without a call. Otherwise up to
/// `attempts` calls until the reply names a candidate in range.
Selection select_best(const EvalCase& c, const llm::ChatClient& evaluator,
                      const EvaluatorOptions& options = {});

struct Judgement {
  Decision decision = Decision::invalid;
  std::string reasons;
  int attempts = 0;
};

Judgement judge(std::string_view question, std::string_view reference, std::string_view answer,
                const llm::ChatClient& evaluator, const EvaluatorOptions& options = {});

/// Selection then judgement for a case whose candidates are filled in.
/// Transport failures make the case invalid rather than aborting.
EvalDecision evaluate_case(const EvalCase& c, const llm::ChatClient& evaluator,
                           const EvaluatorOptions& options = {});

struct HarnessOptions {
  std::size_t candidates = kDefaultCandidates;
  GenerationConfig gen;
  EvaluatorOptions evaluator;
  std::size_t workers = 1;
};

/// Fills missing candidates from `source` (cases that already carry
/// candidates keep them), then evaluates every case. Output is in input
/// order. A case whose candidates cannot be obtained is invalid.
std::vector<EvalDecision> run_evaluation(std::vector<EvalCase>& cases, const AnswerSource* source,
                                         const llm::ChatClient& evaluator,
                                         const HarnessOptions& options = {});

struct AcceptanceReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t invalid = 0;

  double acceptance_rate() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(total);
  }
  /// "54.41%": half-up rounding to two decimals in exact integer arithmetic.
  std::string rate_percent() const;
  friend bool operator==(const AcceptanceReport&, const AcceptanceReport&) = default;
};

AcceptanceReport acceptance_report(const std::vector<EvalDecision>& decisions);
std::string to_json(const AcceptanceReport& report);
AcceptanceReport report_from_json(std::string_view text);

/// Deterministic stand-in evaluator for mock runs. Selection prompts get
/// "BEST: k" with k taken from a digest of the prompt; judge prompts get
/// "accept" or "reject" from the same digest.
llm::ChatBehavior digest_evaluator();

/// Plain-text table: Version | # Accept | Acceptance Rate, then the other
/// counts.
std::string format_table(const std::vector<std::pair<std::string, AcceptanceReport>>& rows);

}  // namespace slidekit::evaluator
