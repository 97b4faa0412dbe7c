// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/llm/chat.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "slidekit/error.hpp"

namespace slidekit::llm {
namespace {

using nlohmann::json;

constexpr std::string_view kJson = "application/json";

json parse_json(std::string_view body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  throw FormatError("unknown chat role '" + std::string(text) + "'");
}

ChatRequest ChatRequest::with_generation(std::string model, std::vector<ChatMessage> messages,
                                         const GenerationConfig& gen) {
  gen.validate();
  ChatRequest r;
  r.model = std::move(model);
  r.messages = std::move(messages);
  r.temperature = gen.temperature;
  r.top_p = gen.top_p;
  r.max_tokens = gen.max_new_tokens;
  r.top_k = gen.top_k;
  return r;
}

void ChatRequest::validate() const {
  if (std::none_of(messages.begin(), messages.end(),
                   [](const ChatMessage& m) { return m.role == Role::user; }))
    throw FormatError("chat request needs at least one user message");
}

std::string serialize(const ChatRequest& request, bool include_top_k) {
  request.validate();
  json messages = json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"top_p", request.top_p},
               {"max_tokens", request.max_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  if (include_top_k && request.top_k) body["extensions"] = {{"top_k", *request.top_k}};
  return body.dump();
}

ChatRequest parse_chat_request(std::string_view body) {
  const json j = parse_json(body, "chat request");
  try {
    ChatRequest r;
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages"))
      r.messages.push_back({parse_role(m.at("role").get<std::string>()),
                            m.at("content").get<std::string>()});
    r.temperature = j.value("temperature", r.temperature);
    r.top_p = j.value("top_p", r.top_p);
    r.max_tokens = j.value("max_tokens", r.max_tokens);
    if (j.contains("seed")) r.seed = j.at("seed").get<std::int64_t>();
    if (j.contains("extensions") && j["extensions"].contains("top_k"))
      r.top_k = j["extensions"]["top_k"].get<std::size_t>();
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("chat request: ") + e.what());
  }
}

std::string serialize(const ChatResponse& response) {
  const json body = {
      {"object", "chat.completion"},
      {"choices",
       json::array({{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", response.content}}},
                     {"finish_reason", response.finish_reason}}})},
      {"usage",
       {{"prompt_tokens", response.usage.prompt_tokens},
        {"completion_tokens", response.usage.completion_tokens},
        {"total_tokens", response.usage.total_tokens}}}};
  return body.dump();
}

ChatResponse parse_chat_response(std::string_view body) {
  const json j = parse_json(body, "chat response");
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (!content.is_string()) throw FormatError("chat response: message content missing");
    ChatResponse r;
    r.content = content.get<std::string>();
    r.finish_reason = choice.value("finish_reason", std::string("stop"));
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      r.usage.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
      r.usage.completion_tokens = u.value("completion_tokens", std::size_t{0});
      r.usage.total_tokens = u.value("total_tokens", std::size_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("chat response: ") + e.what());
  }
}

ChatClient::ChatClient(std::shared_ptr<Transport> transport, ClientOptions options)
    : transport_(std::move(transport)), options_(options) {
  if (!transport_) throw ConfigError("chat client: no transport");
  if (options_.max_in_flight < 1) throw ConfigError("chat client: max_in_flight must be >= 1");
  in_flight_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(options_.max_in_flight));
}

ChatResponse ChatClient::chat(const ChatRequest& request) const {
  if (request.top_k && !options_.supports_top_k && !warned_top_k_.exchange(true))
    spdlog::warn("backend does not accept top_k; dropping top_k={} from requests", *request.top_k);
  const std::string body = serialize(request, options_.supports_top_k);
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*in_flight_};
  spdlog::debug("chat request: {}", body);
  int attempts = 0;
  const HttpResponse r =
      post_with_retry(*transport_, kChatPath, body, kJson, options_.retry, &attempts);
  spdlog::debug("chat response (attempt {}): {}", attempts, r.body);
  return parse_chat_response(r.body);
}

EmbeddingClient::EmbeddingClient(std::shared_ptr<Transport> transport, std::string model,
                                 RetryPolicy retry)
    : transport_(std::move(transport)), model_(std::move(model)), retry_(retry) {
  if (!transport_) throw ConfigError("embedding client: no transport");
}

std::vector<std::vector<double>> EmbeddingClient::embed(
    const std::vector<std::string>& inputs) const {
  if (inputs.empty()) return {};
  const json request = {{"model", model_}, {"input", inputs}};
  const HttpResponse r = post_with_retry(*transport_, kEmbeddingsPath, request.dump(), kJson, retry_);
  const json j = parse_json(r.body, "embedding response");
  try {
    const auto& data = j.at("data");
    if (data.size() != inputs.size())
      throw FormatError("embedding response: " + std::to_string(data.size()) + " vectors for " +
                        std::to_string(inputs.size()) + " inputs");
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    for (const auto& d : data) out.push_back(d.at("embedding").get<std::vector<double>>());
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("embedding response: ") + e.what());
  }
}

}  // namespace slidekit::llm
