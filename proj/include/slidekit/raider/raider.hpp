// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slidekit/llm/chat.hpp"
#include "slidekit/numerics/sampling.hpp"

namespace slidekit::raider {

enum class ReportSource { pre_extracted, ocr_service };

struct ReportDoc {
  std::string doc_id;
  std::string slide_id;
  std::string text;
  ReportSource source = ReportSource::pre_extracted;
};

/// Collapses runs of spaces/tabs to one space and trims each line, turns
/// CRLF into LF, keeps single line breaks, squeezes blank-line runs to one
/// blank line and repairs invalid UTF-8 with U+FFFD.
std::string normalize_text(std::string_view raw);

/// Throws EmptyDocumentError when nothing is left after normalization.
ReportDoc ingest_text(std::string doc_id, std::string slide_id, std::string_view text);

/// POST /ocr with the raw document bytes; expects {"text": ...}. Service
/// failure is an IngestionError, an empty result an EmptyDocumentError.
ReportDoc ingest_ocr(std::string doc_id, std::string slide_id, std::string_view document,
                     llm::Transport& ocr, const llm::RetryPolicy& retry = {});

/// A directory of *.txt files (id = file stem) or a JSON Lines file of
/// {doc_id, slide_id, text}. Sorted by doc_id for directories.
std::vector<ReportDoc> load_reports(const std::string& path);

/// Deterministic surgical-pathology style reports for demos and tests.
std::vector<ReportDoc> synthetic_reports(std::size_t count, std::uint64_t seed);

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  /// Offsets in Unicode code points; `text` is that slice of the document.
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
  std::vector<double> embedding;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingConfig {
  std::size_t chunk_size = 1000;
  std::size_t overlap = 200;
};

/// Chunks start every (chunk_size - overlap) code points; the last one may be
/// shorter. Throws ConfigError unless overlap < chunk_size.
std::vector<Chunk> chunk_text(const ReportDoc& doc, const ChunkingConfig& config = {});

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const = 0;
};

/// Signed feature hashing of lower-cased words. Deterministic, no I/O.
class StubTextEmbedder final : public TextEmbedder {
 public:
  explicit StubTextEmbedder(std::size_t dim = 64);
  std::string name() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const override;

 private:
  std::size_t dim_;
};

/// POST /v1/embeddings in batches.
class RemoteTextEmbedder final : public TextEmbedder {
 public:
  RemoteTextEmbedder(std::shared_ptr<llm::Transport> transport, std::string model, std::size_t dim,
                     llm::RetryPolicy retry = {}, std::size_t batch_size = 32);
  std::string name() const override { return "remote:" + client_.model(); }
  std::size_t dim() const override { return dim_; }
  /// Throws StoreError when the service returns vectors of another size.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const override;

 private:
  llm::EmbeddingClient client_;
  std::size_t dim_;
  std::size_t batch_size_;
};

/// Chunks with embeddings, exact cosine search. Const access is safe from
/// several threads; mutation is single-writer.
class VectorStore {
 public:
  VectorStore() = default;
  VectorStore(std::string embedder, std::size_t dim) : embedder_(std::move(embedder)), dim_(dim) {}

  /// Throws StoreError on a duplicate chunk_id or an embedding of the
  /// wrong size. The first chunk fixes the dimension of an empty store.
  void add(Chunk chunk);

  const std::string& embedder() const noexcept { return embedder_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }
  const Chunk& operator[](std::size_t i) const { return chunks_[i]; }
  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
  double norm(std::size_t i) const { return norms_[i]; }
  const Chunk* find(std::string_view chunk_id) const;

  /// JSON Lines, one chunk per line, plus a "<path>.meta.json" sidecar.
  void save(const std::string& path) const;
  static VectorStore load(const std::string& path);

 private:
  std::string embedder_;
  std::size_t dim_ = 0;
  std::vector<Chunk> chunks_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Embeds every chunk and adds it. Throws StoreError if the embedder's dim
/// differs from a non-empty store's.
void embed_and_store(std::vector<Chunk> chunks, const TextEmbedder& embedder, VectorStore& store);

struct Hit {
  const Chunk* chunk;
  double similarity;
};

/// dot(a, b) / (|a| |b|) on raw vectors, 0 when either norm is 0.
double cosine(std::span<const double> a, std::span<const double> b);

/// Exact top-k by cosine, descending, ties by chunk_id ascending. With
/// `doc_id`, only that document's chunks compete. Throws RetrievalError on
/// an empty candidate set, RangeError for k = 0, DimensionError on a query
/// of the wrong size.
std::vector<Hit> retrieve(const VectorStore& store, std::span<const double> query, std::size_t k,
                          std::optional<std::string_view> doc_id = std::nullopt);

struct GenerationPrompt {
  std::string system;
  std::string user;
};

/// System message is the report-assistant prompt with the chunk texts joined
/// by "\n---\n" and the question filled in; the user message is the
/// question. Throws PromptError when `context` is empty.
GenerationPrompt build_generation_prompt(const std::vector<std::string>& context,
                                         std::string_view question);

enum class Mode { retrieval, full_context };
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct InstructionRecord {
  std::string slide_id;
  std::string question;
  std::string answer;
  std::vector<std::string> context_chunk_ids;
  Mode mode = Mode::retrieval;
  std::string generator_model;
  std::string created_at;

  /// Throws FormatError when the mode and context ids disagree or a required
  /// field is empty.
  void validate() const;
  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

std::string to_json_line(const InstructionRecord& record);
InstructionRecord record_from_json(std::string_view line);
void append_records(const std::string& path, const std::vector<InstructionRecord>& records);
std::vector<InstructionRecord> load_records(const std::string& path);

struct GenerationOptions {
  Mode mode = Mode::retrieval;
  std::size_t top_k = 4;
  /// Retrieve from every report's chunks instead of only the current one.
  bool corpus_wide = false;
  std::string model = "generator";
  GenerationConfig gen;
  std::uint64_t seed = 0;
  /// Answers requested per (report, question).
  std::size_t samples_per_question = 1;
  std::size_t workers = 1;
  std::string created_at = "1970-01-01T00:00:00Z";
  double max_failure_ratio = 0.10;
};

struct GenerationResult {
  std::vector<InstructionRecord> records;
  std::vector<std::string> failures;
  std::size_t attempted = 0;
};

/// One record per (report, question, sample), in that nesting order. Failed
/// LLM calls are logged and skipped; a failure share above
/// max_failure_ratio throws RunError. Retrieval mode needs `store` and
/// `embedder`.
GenerationResult generate_instruction_pairs(const std::vector<ReportDoc>& reports,
                                            const std::vector<std::string>& questions,
                                            const llm::ChatClient& llm,
                                            const GenerationOptions& options,
                                            const VectorStore* store = nullptr,
                                            const TextEmbedder* embedder = nullptr);

}  // namespace slidekit::raider
