// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/evaluator/evaluator.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/parallel.hpp"
#include "slidekit/prompts.hpp"

namespace slidekit::evaluator {
namespace {

using nlohmann::json;

std::int64_t derive_seed(std::uint64_t seed, std::string_view scope, std::string_view case_id,
                         std::size_t index) {
  return static_cast<std::int64_t>(
      stable_hash64(fmt::format("{}:{}:{}:{}", scope, seed, case_id, index)) & 0x7fffffff);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  return lines;
}

template <class T, class Fn>
std::vector<T> parse_lines(const std::string& path, Fn&& parse) {
  std::vector<T> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    try {
      out.push_back(parse(line));
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("{}: record {}: {}", path, n, e.what()));
    }
  }
  return out;
}

template <class T>
void write_lines(const std::string& path, const std::vector<T>& items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  for (const auto& item : items) out << to_json_line(item) << '\n';
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

llm::ChatRequest evaluator_request(const EvaluatorOptions& o, std::string prompt,
                                   std::int64_t seed) {
  llm::ChatRequest r;
  r.model = o.model;
  r.messages = {{llm::Role::user, std::move(prompt)}};
  r.temperature = o.temperature;
  r.top_p = 1.0;
  r.max_tokens = o.max_tokens;
  r.seed = seed;
  return r;
}

}  // namespace

void EvalCase::validate() const {
  if (case_id.empty()) throw FormatError("evaluation case without case_id");
  if (question.empty()) throw FormatError("case '" + case_id + "' has no question");
  if (reference_answer.empty()) throw FormatError("case '" + case_id + "' has no reference answer");
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::accept: return "accept";
    case Decision::reject: return "reject";
    case Decision::invalid: return "invalid";
  }
  return "invalid";
}

Decision parse_decision_name(std::string_view text) {
  if (text == "accept") return Decision::accept;
  if (text == "reject") return Decision::reject;
  if (text == "invalid") return Decision::invalid;
  throw FormatError("unknown decision '" + std::string(text) + "'");
}

std::string to_json_line(const EvalCase& c) {
  return json{{"case_id", c.case_id},
              {"question", c.question},
              {"reference_answer", c.reference_answer},
              {"candidate_answers", c.candidate_answers}}
      .dump();
}

EvalCase case_from_json(std::string_view line) {
  EvalCase c;
  try {
    const json j = json::parse(line);
    c.case_id = j.at("case_id").get<std::string>();
    c.question = j.at("question").get<std::string>();
    c.reference_answer = j.at("reference_answer").get<std::string>();
    if (j.contains("candidate_answers"))
      c.candidate_answers = j["candidate_answers"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation case: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<EvalCase> load_cases(const std::string& path) {
  auto cases = parse_lines<EvalCase>(path, case_from_json);
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.case_id);
  std::sort(ids.begin(), ids.end());
  if (const auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
    throw FormatError(path + ": duplicate case_id '" + *dup + "'");
  return cases;
}

void save_cases(const std::string& path, const std::vector<EvalCase>& cases) {
  write_lines(path, cases);
}

std::string to_json_line(const EvalDecision& d) {
  return json{{"case_id", d.case_id},
              {"best_index", d.best_index ? json(*d.best_index) : json(nullptr)},
              {"decision", to_string(d.decision)},
              {"selection_reasons", d.selection_reasons},
              {"judgement_reasons", d.judgement_reasons},
              {"attempts", d.attempts}}
      .dump();
}

EvalDecision decision_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    EvalDecision d;
    d.case_id = j.at("case_id").get<std::string>();
    if (!j.at("best_index").is_null()) d.best_index = j["best_index"].get<std::size_t>();
    d.decision = parse_decision_name(j.at("decision").get<std::string>());
    d.selection_reasons = j.at("selection_reasons").get<std::string>();
    d.judgement_reasons = j.at("judgement_reasons").get<std::string>();
    d.attempts = j.at("attempts").get<int>();
    if (d.decision != Decision::invalid && !d.best_index)
      throw FormatError("decision for '" + d.case_id + "' has no best_index");
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation decision: ") + e.what());
  }
}

std::vector<EvalDecision> load_decisions(const std::string& path) {
  return parse_lines<EvalDecision>(path, decision_from_json);
}

void save_decisions(const std::string& path, const std::vector<EvalDecision>& decisions) {
  write_lines(path, decisions);
}

ChatAnswerSource::ChatAnswerSource(const llm::ChatClient& client, std::string model,
                                   std::uint64_t seed)
    : client_(client), model_(std::move(model)), seed_(seed) {}

std::vector<std::string> ChatAnswerSource::answers(const EvalCase& c, std::size_t n,
                                                   const GenerationConfig& gen) const {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto request = llm::ChatRequest::with_generation(
        model_,
        {{llm::Role::system, std::string(prompts::kInstructionTuning)},
         {llm::Role::user, c.question}},
        gen);
    request.seed = derive_seed(seed_, "candidate", c.case_id, i);
    out.push_back(client_.chat(request).content);
  }
  return out;
}

RecordedAnswerSource::RecordedAnswerSource(std::map<std::string, std::vector<std::string>> answers)
    : answers_(std::move(answers)) {}

RecordedAnswerSource RecordedAnswerSource::load(const std::string& path) {
  std::map<std::string, std::vector<std::string>> answers;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    try {
      const json j = json::parse(line);
      auto id = j.at("case_id").get<std::string>();
      if (answers.count(id)) throw FormatError("duplicate case_id '" + id + "'");
      answers.emplace(std::move(id), j.at("answers").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      throw FormatError(fmt::format("{}: record {}: {}", path, n, e.what()));
    }
  }
  return RecordedAnswerSource(std::move(answers));
}

std::vector<std::string> RecordedAnswerSource::answers(const EvalCase& c, std::size_t n,
                                                       const GenerationConfig&) const {
  const auto it = answers_.find(c.case_id);
  if (it == answers_.end()) throw InputError("no recorded answers for case '" + c.case_id + "'");
  if (it->second.size() < n)
    throw InputError(fmt::format("case '{}' has {} recorded answers, {} requested", c.case_id,
                                 it->second.size(), n));
  return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::string> collect_candidates(const EvalCase& c, const AnswerSource& source,
                                            std::size_t n, const GenerationConfig& gen) {
  if (n == 0) throw RangeError("at least one candidate answer is required");
  gen.validate();
  auto out = source.answers(c, n, gen);
  if (out.size() != n)
    throw InputError(fmt::format("answer source returned {} answers for case '{}', expected {}",
                                 out.size(), c.case_id, n));
  return out;
}

std::string build_selection_prompt(const EvalCase& c) {
  std::string prompt = fmt::format(
      "You will compare {} candidate answers to a pathology question against a reference "
      "answer. Think through the strengths and weaknesses of each candidate step by step, "
      "then end your reply with one line of the form \"BEST: <number>\" giving the number of "
      "the single best candidate.\n\n"
      "Question: {}\nReference Answer: {}\n\nCandidates:\n",
      c.candidate_answers.size(), c.question, c.reference_answer);
  for (std::size_t i = 0; i < c.candidate_answers.size(); ++i)
    prompt += fmt::format("{}. {}\n", i + 1, c.candidate_answers[i]);
  return prompt;
}

std::string build_judge_prompt(std::string_view question, std::string_view reference,
                               std::string_view answer) {
  return prompts::fill(prompts::kEvaluation, {{"question", std::string(question)},
                                              {"answer", std::string(reference)},
                                              {"llm answer", std::string(answer)}});
}

std::optional<std::size_t> parse_best(std::string_view reply) {
  std::optional<std::size_t> best;
  constexpr std::string_view kTag = "best:";
  for (std::size_t i = 0; i + kTag.size() <= reply.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < kTag.size() && match; ++k)
      match = std::tolower(static_cast<unsigned char>(reply[i + k])) == kTag[k];
    if (!match) continue;
    std::size_t j = i + kTag.size();
    while (j < reply.size() && (reply[j] == ' ' || reply[j] == '\t')) ++j;
    std::size_t value = 0, digits = 0;
    while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j])) && digits < 9) {
      value = value * 10 + static_cast<std::size_t>(reply[j] - '0');
      ++j;
      ++digits;
    }
    if (digits > 0) best = value;
  }
  return best;
}

std::optional<Decision> parse_decision(std::string_view reply) {
  std::optional<Decision> last;
  std::string lower(reply);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::size_t last_pos = 0;
  for (const auto& [word, decision] : {std::pair{std::string_view("accept"), Decision::accept},
                                       std::pair{std::string_view("reject"), Decision::reject}}) {
    for (auto pos = lower.find(word); pos != std::string::npos; pos = lower.find(word, pos + 1)) {
      const bool left_ok = pos == 0 || !is_letter(lower[pos - 1]);
      const bool right_ok = pos + word.size() == lower.size() || !is_letter(lower[pos + word.size()]);
      if (left_ok && right_ok && (!last || pos >= last_pos)) {
        last = decision;
        last_pos = pos;
      }
    }
  }
  return last;
}

Selection select_best(const EvalCase& c, const llm::ChatClient& evaluator,
                      const EvaluatorOptions& options) {
  const std::size_t n = c.candidate_answers.size();
  if (n == 0) throw InputError("case '" + c.case_id + "' has no candidates to select from");
  if (n == 1) return {0, "single candidate", 0};
  Selection s;
  const std::string prompt = build_selection_prompt(c);
  for (int attempt = 0; attempt < options.attempts; ++attempt) {
    ++s.attempts;
    try {
      const auto reply = evaluator.chat(evaluator_request(
          options, prompt, derive_seed(options.seed, "select", c.case_id, attempt)));
      s.reasons = reply.content;
      const auto best = parse_best(reply.content);
      if (best && *best >= 1 && *best <= n) {
        s.best_index = *best - 1;
        return s;
      }
    } catch (const Error& e) {
      s.reasons = std::string("evaluator error: ") + e.what();
    }
  }
  return s;
}

Judgement judge(std::string_view question, std::string_view reference, std::string_view answer,
                const llm::ChatClient& evaluator, const EvaluatorOptions& options) {
  Judgement j;
  const std::string prompt = build_judge_prompt(question, reference, answer);
  const std::string key(question);
  for (int attempt = 0; attempt < options.attempts; ++attempt) {
    ++j.attempts;
    try {
      const auto reply = evaluator.chat(evaluator_request(
          options, prompt,
          derive_seed(options.seed, "judge", key + "\n" + std::string(answer), attempt)));
      j.reasons = reply.content;
      if (const auto d = parse_decision(reply.content)) {
        j.decision = *d;
        return j;
      }
    } catch (const Error& e) {
      j.reasons = std::string("evaluator error: ") + e.what();
    }
  }
  j.decision = Decision::invalid;
  return j;
}

EvalDecision evaluate_case(const EvalCase& c, const llm::ChatClient& evaluator,
                           const EvaluatorOptions& options) {
  EvalDecision d;
  d.case_id = c.case_id;
  if (c.candidate_answers.empty()) {
    d.selection_reasons = "no candidate answers";
    return d;
  }
  const Selection s = select_best(c, evaluator, options);
  d.selection_reasons = s.reasons;
  d.attempts = s.attempts;
  if (!s.best_index) return d;
  d.best_index = s.best_index;
  const Judgement j = judge(c.question, c.reference_answer, c.candidate_answers[*s.best_index],
                            evaluator, options);
  d.decision = j.decision;
  d.judgement_reasons = j.reasons;
  d.attempts += j.attempts;
  return d;
}

std::vector<EvalDecision> run_evaluation(std::vector<EvalCase>& cases, const AnswerSource* source,
                                         const llm::ChatClient& evaluator,
                                         const HarnessOptions& options) {
  if (options.candidates == 0) throw RangeError("at least one candidate answer is required");
  options.gen.validate();
  std::vector<EvalDecision> out(cases.size());
  parallel_for(cases.size(), options.workers, [&](std::size_t i) {
    EvalCase& c = cases[i];
    c.validate();
    if (c.candidate_answers.empty()) {
      if (!source) throw ConfigError("case '" + c.case_id + "' has no candidates and no source");
      try {
        c.candidate_answers = collect_candidates(c, *source, options.candidates, options.gen);
      } catch (const Error& e) {
        spdlog::warn("case {}: candidate generation failed: {}", c.case_id, e.what());
        out[i].case_id = c.case_id;
        out[i].selection_reasons = std::string("candidate generation failed: ") + e.what();
        return;
      }
    }
    out[i] = evaluate_case(c, evaluator, options.evaluator);
  });
  return out;
}

std::string AcceptanceReport::rate_percent() const {
  if (total == 0) return "0.00%";
  // Hundredths of a percent, rounded half up: accepted * 10000 / total.
  const auto scaled = (static_cast<unsigned long long>(accepted) * 20000ULL + total) /
                      (2ULL * static_cast<unsigned long long>(total));
  return fmt::format("{}.{:02}%", scaled / 100, scaled % 100);
}

AcceptanceReport acceptance_report(const std::vector<EvalDecision>& decisions) {
  AcceptanceReport r;
  r.total = decisions.size();
  for (const auto& d : decisions) {
    switch (d.decision) {
      case Decision::accept: ++r.accepted; break;
      case Decision::reject: ++r.rejected; break;
      case Decision::invalid: ++r.invalid; break;
    }
  }
  return r;
}

std::string to_json(const AcceptanceReport& r) {
  return json{{"total", r.total},
              {"accepted", r.accepted},
              {"rejected", r.rejected},
              {"invalid", r.invalid},
              {"acceptance_rate", r.acceptance_rate()},
              {"acceptance_rate_percent", r.rate_percent()}}
      .dump(2);
}

AcceptanceReport report_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    AcceptanceReport r{j.at("total").get<std::size_t>(), j.at("accepted").get<std::size_t>(),
                       j.at("rejected").get<std::size_t>(), j.at("invalid").get<std::size_t>()};
    if (r.accepted + r.rejected + r.invalid != r.total)
      throw FormatError(fmt::format("acceptance report counts {} + {} + {} do not sum to {}",
                                    r.accepted, r.rejected, r.invalid, r.total));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("acceptance report: ") + e.what());
  }
}

llm::ChatBehavior digest_evaluator() {
  return [](const llm::ChatRequest& request) -> std::string {
    const std::string& prompt = request.messages.back().content;
    const std::uint64_t h = stable_hash64(prompt);
    constexpr std::string_view kLead = "You will compare ";
    if (prompt.rfind(kLead, 0) == 0) {
      const std::size_t n = std::strtoull(prompt.c_str() + kLead.size(), nullptr, 10);
      return fmt::format("Mock comparison.\nBEST: {}", n == 0 ? 1 : h % n + 1);
    }
    return (h >> 8) % 2 == 0 ? "Mock judgement. accept" : "Mock judgement. reject";
  };
}

std::string format_table(const std::vector<std::pair<std::string, AcceptanceReport>>& rows) {
  std::size_t width = std::string_view("Version").size();
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  const auto line = [&](std::string_view a, std::string_view b, std::string_view c,
                        std::string_view d, std::string_view e, std::string_view f) {
    return fmt::format("{:<{}}  {:>8}  {:>15}  {:>8}  {:>9}  {:>5}\n", a, width, b, c, d, e, f);
  };
  std::string out = line("Version", "# Accept", "Acceptance Rate", "# Reject", "# Invalid", "Total");
  out += line(std::string(width, '-'), "--------", "---------------", "--------", "---------",
              "-----");
  for (const auto& [name, r] : rows)
    out += line(name, std::to_string(r.accepted), r.rate_percent(), std::to_string(r.rejected),
                std::to_string(r.invalid), std::to_string(r.total));
  return out;
}

}  // namespace slidekit::evaluator
