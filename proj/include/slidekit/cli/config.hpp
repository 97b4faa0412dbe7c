// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidekit/evaluator/evaluator.hpp"
#include "slidekit/numerics/lora.hpp"
#include "slidekit/raider/raider.hpp"
#include "slidekit/tiling/tiling.hpp"
#include "slidekit/trainer/trainer.hpp"
#include "slidekit/vision/tower.hpp"

namespace slidekit::cli {

inline constexpr std::string_view kMock = "mock";
inline constexpr std::string_view kEndpointNames[] = {"generator", "evaluator", "embedder", "ocr",
                                                      "encoder"};

struct Endpoint {
  std::string name;
  /// Base URL, "mock", or empty when not configured.
  std::string url;
  std::string model;
  std::string token;
  bool supports_top_k = false;
  int max_attempts = 3;
  int backoff_ms = 200;
  std::size_t max_in_flight = 4;

  bool is_mock() const noexcept { return url == kMock; }
};

/// One JSON document holding every module default. Files and --set
/// overrides are merged over the built-in defaults; keys that do not exist
/// in the defaults are rejected so typos fail loudly.
class PipelineConfig {
 public:
  PipelineConfig();

  static const nlohmann::json& defaults();
  /// Defaults merged with the file at `path`.
  static PipelineConfig load(const std::string& path);

  /// Merges a JSON object (RFC 7386 merge patch) after key validation.
  void merge(const nlohmann::json& patch);
  /// "a.b.c=value"; value parsed as JSON, falling back to a plain string.
  void set(std::string_view assignment);
  /// Endpoint tokens from SLIDEKIT_<NAME>_TOKEN (or the configured
  /// token_env) and URLs from SLIDEKIT_<NAME>_URL.
  void apply_environment();

  /// The effective configuration. Tokens are never part of it.
  const nlohmann::json& document() const noexcept { return values_; }
  /// SHA-256 of the canonical (sorted, compact) document.
  std::string hash() const;

  std::uint64_t seed() const;
  std::string output_dir() const;

  /// True when the endpoint has a URL (real or "mock").
  bool has_endpoint(std::string_view name) const;
  /// Throws ConfigError when the endpoint is neither configured nor "mock".
  Endpoint endpoint(std::string_view name) const;

  tiling::TileParams tile_params() const;
  int tissue_threshold() const;
  std::size_t encoder_dim() const;
  std::size_t workers() const;
  vision::TowerDims tower_dims() const;
  raider::ChunkingConfig chunking() const;
  raider::GenerationOptions generation_options() const;
  std::size_t text_embedding_dim() const;
  GenerationConfig generation() const;
  evaluator::HarnessOptions harness_options() const;
  trainer::TrainConfig alignment_training() const;
  trainer::SyntheticAlignmentSpec synthetic_alignment() const;
  std::size_t synthetic_held_out() const;
  trainer::TrainConfig instruction_training() const;
  LoraConfig lora() const;
  std::size_t toy_decoder_dim() const;

 private:
  nlohmann::json values_;
  std::map<std::string, std::string> tokens_;
};

}  // namespace slidekit::cli
