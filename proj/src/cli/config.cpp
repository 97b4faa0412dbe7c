// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/cli/config.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"

namespace slidekit::cli {
namespace {

using nlohmann::json;

json endpoint_defaults(std::string_view name) {
  return {{"url", ""},          {"model", std::string(name)}, {"token_env", ""},
          {"supports_top_k", false}, {"max_attempts", 3},   {"backoff_ms", 200},
          {"max_in_flight", 4}};
}

json build_defaults() {
  json endpoints = json::object();
  for (auto name : kEndpointNames) endpoints[std::string(name)] = endpoint_defaults(name);
  return {
      {"seed", 0},
      {"output_dir", "runs"},
      {"workers", 1},
      {"endpoints", endpoints},
      {"tiling",
       {{"patch_size", 256},
        {"stride", 0},
        {"min_tissue_fraction", 0.25},
        {"mpp", 0.5},
        {"tissue_threshold", 220},
        {"encoder_dim", 512}}},
      {"tower",
       {{"input", 512},
        {"hidden", 512},
        {"attention", 256},
        {"projector_model", 512},
        {"projector_hidden", 4096},
        {"output", 4096}}},
      {"raider",
       {{"chunk_size", 1000},
        {"chunk_overlap", 200},
        {"top_k", 4},
        {"mode", "retrieval"},
        {"corpus_wide", false},
        {"samples_per_question", 1},
        {"embedding_dim", 64},
        {"max_failure_ratio", 0.1},
        {"created_at", "1970-01-01T00:00:00Z"}}},
      {"generation", {{"temperature", 0.7}, {"top_k", 50}, {"top_p", 0.95}, {"max_new_tokens", 128}}},
      {"evaluation",
       {{"candidates", 10},
        {"temperature", 0.0},
        {"max_tokens", 1024},
        {"attempts", 3},
        {"mock_script", ""}}},
      {"alignment",
       {{"batch_size", 64},
        {"grad_accumulation", 2},
        {"epochs", 1},
        {"peak_lr", 2e-3},
        {"warmup_ratio", 0.03},
        {"temperature", 0.07},
        {"objective", "contrastive"},
        {"synthetic", {{"pairs", 32}, {"held_out", 32}, {"patches", 16}, {"map_seed", 1}}}}},
      {"instruction",
       {{"batch_size", 64},
        {"grad_accumulation", 2},
        {"epochs", 1},
        {"peak_lr", 2e-5},
        {"warmup_ratio", 0.03},
        {"lora_rank", 64},
        {"lora_alpha", 16.0},
        {"lora_dropout", 0.05},
        {"decoder_dim", 64}}},
  };
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void check_keys(const json& patch, const json& schema, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("configuration " + path + " must be a JSON object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown configuration key '" + where + "'");
    const json& expected = schema.at(key);
    if (expected.is_object()) {
      check_keys(value, expected, where);
    } else if (!same_kind(value, expected)) {
      throw ConfigError(fmt::format("configuration key '{}' expects a {}, got {}", where,
                                    expected.type_name(), value.type_name()));
    }
  }
}

template <class T>
T get(const json& j, std::string_view pointer) {
  try {
    return j.at(json::json_pointer(std::string(pointer))).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("configuration {}: {}", pointer, e.what()));
  }
}

std::size_t get_count(const json& j, std::string_view pointer) {
  const auto v = get<double>(j, pointer);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
    throw ConfigError(fmt::format("configuration {} must be a non-negative integer", pointer));
  return static_cast<std::size_t>(v);
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const json& PipelineConfig::defaults() {
  static const json d = build_defaults();
  return d;
}

PipelineConfig::PipelineConfig() : values_(defaults()) {}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json patch;
  try {
    patch = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError("configuration '" + path + "' is not valid JSON: " + e.what());
  }
  PipelineConfig cfg;
  cfg.merge(patch);
  return cfg;
}

void PipelineConfig::merge(const json& patch) {
  check_keys(patch, defaults(), "");
  values_.merge_patch(patch);
}

void PipelineConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' must look like key.path=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge(patch);
}

void PipelineConfig::apply_environment() {
  for (auto name : kEndpointNames) {
    const std::string key(name);
    auto& ep = values_["endpoints"][key];
    std::string token_env = ep.value("token_env", "");
    if (token_env.empty()) token_env = "SLIDEKIT_" + upper(name) + "_TOKEN";
    if (const char* token = std::getenv(token_env.c_str())) tokens_[key] = token;
    if (const char* url = std::getenv(("SLIDEKIT_" + upper(name) + "_URL").c_str())) ep["url"] = url;
  }
}

std::string PipelineConfig::hash() const { return sha256_hex(values_.dump()); }

std::uint64_t PipelineConfig::seed() const { return get<std::uint64_t>(values_, "/seed"); }

std::string PipelineConfig::output_dir() const { return get<std::string>(values_, "/output_dir"); }

bool PipelineConfig::has_endpoint(std::string_view name) const {
  const auto& eps = values_.at("endpoints");
  const std::string key(name);
  return eps.contains(key) && !eps.at(key).value("url", "").empty();
}

Endpoint PipelineConfig::endpoint(std::string_view name) const {
  const std::string base = "/endpoints/" + std::string(name);
  if (!values_.at("endpoints").contains(std::string(name)))
    throw ConfigError("unknown endpoint '" + std::string(name) + "'");
  Endpoint ep;
  ep.name = std::string(name);
  ep.url = get<std::string>(values_, base + "/url");
  if (ep.url.empty())
    throw ConfigError(fmt::format(
        "endpoint '{}' is not configured: set endpoints.{}.url to a base URL or \"mock\"", name,
        name));
  ep.model = get<std::string>(values_, base + "/model");
  ep.supports_top_k = get<bool>(values_, base + "/supports_top_k");
  ep.max_attempts = get<int>(values_, base + "/max_attempts");
  ep.backoff_ms = get<int>(values_, base + "/backoff_ms");
  ep.max_in_flight = get_count(values_, base + "/max_in_flight");
  if (auto it = tokens_.find(ep.name); it != tokens_.end()) ep.token = it->second;
  return ep;
}

tiling::TileParams PipelineConfig::tile_params() const {
  tiling::TileParams p;
  p.patch_size = get_count(values_, "/tiling/patch_size");
  p.stride = get_count(values_, "/tiling/stride");
  p.min_tissue_fraction = get<double>(values_, "/tiling/min_tissue_fraction");
  p.mpp = get<double>(values_, "/tiling/mpp");
  return p;
}

int PipelineConfig::tissue_threshold() const { return get<int>(values_, "/tiling/tissue_threshold"); }

std::size_t PipelineConfig::encoder_dim() const { return get_count(values_, "/tiling/encoder_dim"); }

std::size_t PipelineConfig::workers() const { return get_count(values_, "/workers"); }

vision::TowerDims PipelineConfig::tower_dims() const {
  vision::TowerDims d;
  d.aggregator.input = get_count(values_, "/tower/input");
  d.aggregator.hidden = get_count(values_, "/tower/hidden");
  d.aggregator.attention = get_count(values_, "/tower/attention");
  d.projector_model = get_count(values_, "/tower/projector_model");
  d.projector_hidden = get_count(values_, "/tower/projector_hidden");
  d.output = get_count(values_, "/tower/output");
  return d;
}

raider::ChunkingConfig PipelineConfig::chunking() const {
  return {get_count(values_, "/raider/chunk_size"), get_count(values_, "/raider/chunk_overlap")};
}

GenerationConfig PipelineConfig::generation() const {
  GenerationConfig g;
  g.temperature = get<double>(values_, "/generation/temperature");
  g.top_k = get_count(values_, "/generation/top_k");
  g.top_p = get<double>(values_, "/generation/top_p");
  g.max_new_tokens = get_count(values_, "/generation/max_new_tokens");
  g.validate();
  return g;
}

raider::GenerationOptions PipelineConfig::generation_options() const {
  raider::GenerationOptions o;
  o.mode = raider::parse_mode(get<std::string>(values_, "/raider/mode"));
  o.top_k = get_count(values_, "/raider/top_k");
  o.corpus_wide = get<bool>(values_, "/raider/corpus_wide");
  o.samples_per_question = get_count(values_, "/raider/samples_per_question");
  o.max_failure_ratio = get<double>(values_, "/raider/max_failure_ratio");
  o.created_at = get<std::string>(values_, "/raider/created_at");
  o.gen = generation();
  o.seed = seed();
  o.workers = workers();
  return o;
}

std::size_t PipelineConfig::text_embedding_dim() const {
  return get_count(values_, "/raider/embedding_dim");
}

evaluator::HarnessOptions PipelineConfig::harness_options() const {
  evaluator::HarnessOptions o;
  o.candidates = get_count(values_, "/evaluation/candidates");
  o.gen = generation();
  o.workers = workers();
  o.evaluator.temperature = get<double>(values_, "/evaluation/temperature");
  o.evaluator.max_tokens = get_count(values_, "/evaluation/max_tokens");
  o.evaluator.attempts = get<int>(values_, "/evaluation/attempts");
  o.evaluator.seed = seed();
  return o;
}

namespace {

trainer::TrainConfig train_section(const json& j, std::string_view section, std::uint64_t seed) {
  const std::string base = "/" + std::string(section);
  trainer::TrainConfig c;
  c.batch_size = get_count(j, base + "/batch_size");
  c.grad_accumulation = get_count(j, base + "/grad_accumulation");
  c.epochs = get_count(j, base + "/epochs");
  c.schedule.peak_lr = get<double>(j, base + "/peak_lr");
  c.schedule.warmup_ratio = get<double>(j, base + "/warmup_ratio");
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

trainer::TrainConfig PipelineConfig::alignment_training() const {
  auto c = train_section(values_, "alignment", seed());
  c.temperature = get<double>(values_, "/alignment/temperature");
  c.objective = trainer::parse_objective(get<std::string>(values_, "/alignment/objective"));
  c.validate();
  return c;
}

trainer::SyntheticAlignmentSpec PipelineConfig::synthetic_alignment() const {
  trainer::SyntheticAlignmentSpec s;
  s.pairs = get_count(values_, "/alignment/synthetic/pairs");
  s.patches = get_count(values_, "/alignment/synthetic/patches");
  s.map_seed = get<std::uint64_t>(values_, "/alignment/synthetic/map_seed");
  const auto dims = tower_dims();
  s.input_dim = dims.aggregator.input;
  s.target_dim = dims.output;
  return s;
}

std::size_t PipelineConfig::synthetic_held_out() const {
  return get_count(values_, "/alignment/synthetic/held_out");
}

trainer::TrainConfig PipelineConfig::instruction_training() const {
  return train_section(values_, "instruction", seed());
}

LoraConfig PipelineConfig::lora() const {
  return {get_count(values_, "/instruction/lora_rank"), get<double>(values_, "/instruction/lora_alpha"),
          get<double>(values_, "/instruction/lora_dropout")};
}

std::size_t PipelineConfig::toy_decoder_dim() const {
  return get_count(values_, "/instruction/decoder_dim");
}

}  // namespace slidekit::cli
