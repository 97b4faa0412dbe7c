// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/parallel.hpp"
#include "slidekit/prompts.hpp"
#include "slidekit/raider/raider.hpp"

namespace slidekit::raider {
namespace {

using nlohmann::json;

std::int64_t request_seed(std::uint64_t seed, std::string_view doc_id, std::size_t question,
                          std::size_t sample) {
  const auto h = stable_hash64(fmt::format("raider:{}:{}:{}:{}", seed, doc_id, question, sample));
  return static_cast<std::int64_t>(h & 0x7fffffff);
}

}  // namespace

GenerationPrompt build_generation_prompt(const std::vector<std::string>& context,
                                         std::string_view question) {
  if (context.empty()) throw PromptError("generation prompt needs at least one context block");
  std::string joined;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) joined += prompts::kContextSeparator;
    joined += context[i];
  }
  const std::string tmpl = std::string(prompts::kRaider) + std::string(prompts::kRaiderSuffix);
  return {prompts::fill(tmpl, {{"context", joined}, {"question", std::string(question)}}),
          std::string(question)};
}

std::string_view to_string(Mode mode) {
  return mode == Mode::retrieval ? "retrieval" : "full_context";
}

Mode parse_mode(std::string_view text) {
  if (text == "retrieval") return Mode::retrieval;
  if (text == "full_context") return Mode::full_context;
  throw ConfigError("unknown generation mode '" + std::string(text) +
                    "' (expected retrieval or full_context)");
}

void InstructionRecord::validate() const {
  if (slide_id.empty()) throw FormatError("instruction record without slide_id");
  if (question.empty()) throw FormatError("instruction record for '" + slide_id + "' has no question");
  if (answer.empty()) throw FormatError("instruction record for '" + slide_id + "' has no answer");
  if (generator_model.empty()) throw FormatError("instruction record without generator_model");
  if (mode == Mode::retrieval && context_chunk_ids.empty())
    throw FormatError("retrieval record for '" + slide_id + "' lists no context chunks");
  if (mode == Mode::full_context && !context_chunk_ids.empty())
    throw FormatError("full_context record for '" + slide_id + "' lists context chunks");
}

std::string to_json_line(const InstructionRecord& r) {
  r.validate();
  return json{{"slide_id", r.slide_id},
              {"question", r.question},
              {"answer", r.answer},
              {"context_chunk_ids", r.context_chunk_ids},
              {"mode", to_string(r.mode)},
              {"generator_model", r.generator_model},
              {"created_at", r.created_at}}
      .dump();
}

InstructionRecord record_from_json(std::string_view line) {
  InstructionRecord r;
  try {
    const json j = json::parse(line);
    r.slide_id = j.at("slide_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.context_chunk_ids = j.at("context_chunk_ids").get<std::vector<std::string>>();
    r.generator_model = j.at("generator_model").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode != "retrieval" && mode != "full_context")
      throw FormatError("instruction record has unknown mode '" + mode + "'");
    r.mode = parse_mode(mode);
  } catch (const json::exception& e) {
    throw FormatError(std::string("instruction record: ") + e.what());
  }
  r.validate();
  return r;
}

void append_records(const std::string& path, const std::vector<InstructionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot append to '" + path + "'");
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<InstructionRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::vector<InstructionRecord> records;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(line));
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("{}:{}: {}", path, n, e.what()));
    }
  }
  return records;
}

GenerationResult generate_instruction_pairs(const std::vector<ReportDoc>& reports,
                                            const std::vector<std::string>& questions,
                                            const llm::ChatClient& llm,
                                            const GenerationOptions& options,
                                            const VectorStore* store,
                                            const TextEmbedder* embedder) {
  if (questions.empty()) throw ConfigError("no questions to generate answers for");
  if (options.samples_per_question == 0) throw ConfigError("samples_per_question must be >= 1");
  if (!(options.max_failure_ratio >= 0.0 && options.max_failure_ratio <= 1.0))
    throw ConfigError("max_failure_ratio must lie in [0, 1]");
  options.gen.validate();

  std::vector<std::vector<double>> query_embeddings;
  if (options.mode == Mode::retrieval) {
    if (!store || !embedder) throw ConfigError("retrieval mode needs a vector store and embedder");
    if (store->empty()) throw RetrievalError("retrieval mode needs a built vector store");
    if (options.top_k == 0) throw RangeError("retrieval k must be >= 1");
    if (embedder->dim() != store->dim())
      throw StoreError(fmt::format("query embedder '{}' has dim {}, store holds {}",
                                   embedder->name(), embedder->dim(), store->dim()));
    query_embeddings = embedder->embed(questions);
  }

  const std::size_t per_report = questions.size() * options.samples_per_question;
  const std::size_t total = reports.size() * per_report;
  std::vector<std::optional<InstructionRecord>> slots(total);
  std::vector<std::string> errors(total);

  parallel_for(total, options.workers, [&](std::size_t job) {
    const ReportDoc& report = reports[job / per_report];
    const std::size_t q = (job % per_report) / options.samples_per_question;
    const std::size_t sample = job % options.samples_per_question;
    try {
      InstructionRecord rec;
      rec.slide_id = report.slide_id;
      rec.question = questions[q];
      rec.mode = options.mode;
      rec.generator_model = options.model;
      rec.created_at = options.created_at;

      std::vector<std::string> context;
      if (options.mode == Mode::retrieval) {
        const auto scope = options.corpus_wide ? std::nullopt
                                               : std::optional<std::string_view>(report.doc_id);
        for (const Hit& h : retrieve(*store, query_embeddings[q], options.top_k, scope)) {
          context.push_back(h.chunk->text);
          rec.context_chunk_ids.push_back(h.chunk->chunk_id);
        }
      } else {
        context.push_back(report.text);
      }

      const auto prompt = build_generation_prompt(context, rec.question);
      auto request = llm::ChatRequest::with_generation(
          options.model, {{llm::Role::system, prompt.system}, {llm::Role::user, prompt.user}},
          options.gen);
      request.seed = request_seed(options.seed, report.doc_id, q, sample);
      rec.answer = llm.chat(request).content;
      rec.validate();
      slots[job] = std::move(rec);
    } catch (const Error& e) {
      errors[job] = fmt::format("{} / question {}: {}", report.doc_id, q + 1, e.what());
      spdlog::warn("skipping record: {}", errors[job]);
    }
  });

  GenerationResult result;
  result.attempted = total;
  for (std::size_t i = 0; i < total; ++i) {
    if (slots[i])
      result.records.push_back(std::move(*slots[i]));
    else
      result.failures.push_back(std::move(errors[i]));
  }
  if (total > 0 && static_cast<double>(result.failures.size()) >
                       options.max_failure_ratio * static_cast<double>(total))
    throw RunError(fmt::format("{} of {} generation requests failed (limit {:.0f}%); first: {}",
                               result.failures.size(), total, options.max_failure_ratio * 100,
                               result.failures.front()));
  return result;
}

}  // namespace slidekit::raider
