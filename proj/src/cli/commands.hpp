// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slidekit/cli/config.hpp"
#include "slidekit/llm/chat.hpp"
#include "slidekit/llm/mock.hpp"
#include "slidekit/raider/raider.hpp"

namespace slidekit::cli {

namespace fs = std::filesystem;

/// State shared by one command invocation.
class RunContext {
 public:
  RunContext(PipelineConfig cfg, std::ostream& out, std::string evaluator_script);

  const PipelineConfig& config() const noexcept { return cfg_; }
  const fs::path& out_dir() const noexcept { return out_dir_; }
  std::ostream& out() const noexcept { return out_; }

  /// Path under the output directory; the directory is created on demand.
  fs::path output(const std::string& name);
  /// Marks a written file (or every file of a directory) for the manifest.
  void record(const fs::path& path);
  const std::vector<fs::path>& recorded() const noexcept { return recorded_; }

  /// In-process mock or HTTP transport for a configured endpoint.
  std::shared_ptr<llm::Transport> transport(const Endpoint& endpoint);
  static llm::RetryPolicy retry(const Endpoint& endpoint);
  std::unique_ptr<llm::ChatClient> chat_client(std::string_view endpoint);
  /// Hashed stub when no embedder endpoint is configured.
  std::unique_ptr<raider::TextEmbedder> text_embedder();

 private:
  std::shared_ptr<llm::MockLlmService> mock_services();
  std::shared_ptr<llm::MockLlmService> mock_evaluator();

  PipelineConfig cfg_;
  std::ostream& out_;
  std::string evaluator_script_;
  fs::path out_dir_;
  std::vector<fs::path> recorded_;
  std::shared_ptr<llm::MockLlmService> mock_;
  std::shared_ptr<llm::MockLlmService> mock_eval_;
};

struct TileArgs {
  std::string image;
  std::string slide_id;
};

struct EncodeArgs {
  std::string image;
  std::string tiles;
  std::string slide_id;
};

struct AggregateArgs {
  std::string embeddings;
  std::string checkpoint;
  std::string slide_id;
};

struct TrainAlignArgs {
  std::string pairs;
  std::string init_checkpoint;
};

struct TrainInstructArgs {
  std::string records;
};

struct RaiderArgs {
  std::string reports;
  bool ocr = false;
  std::string store;
  std::string questions;
};

struct EvaluateArgs {
  std::string cases;
  std::string records;
  std::string answers;
};

struct ReportArgs {
  std::vector<std::string> decisions;
  std::vector<std::string> labels;
};

void run_tile(RunContext& ctx, const TileArgs& args);
void run_encode(RunContext& ctx, const EncodeArgs& args);
void run_aggregate(RunContext& ctx, const AggregateArgs& args);
void run_train_align(RunContext& ctx, const TrainAlignArgs& args);
void run_train_instruct(RunContext& ctx, const TrainInstructArgs& args);
void run_raider_build(RunContext& ctx, const RaiderArgs& args);
void run_raider_generate(RunContext& ctx, const RaiderArgs& args);
void run_evaluate(RunContext& ctx, const EvaluateArgs& args);
void run_report(RunContext& ctx, const ReportArgs& args);

}  // namespace slidekit::cli
