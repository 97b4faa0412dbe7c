// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/llm/mock.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slidekit/digest.hpp"
#include "slidekit/error.hpp"
#include "slidekit/prompts.hpp"
#include "slidekit/stub_embedding.hpp"

namespace slidekit::llm {
namespace {

using nlohmann::json;

std::string joined_contents(const ChatRequest& r) {
  std::string all;
  for (const auto& m : r.messages) {
    if (!all.empty()) all += '\n';
    all += m.content;
  }
  return all;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\n' || c == '\t';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

HttpResponse error_response(int status, std::string_view message) {
  return {status, json{{"error", {{"message", message}}}}.dump()};
}

}  // namespace

ChatBehavior digest_reply() {
  return [](const ChatRequest& r) {
    json key = json::array();
    for (const auto& m : r.messages) key.push_back({to_string(m.role), m.content});
    key.push_back(r.seed ? json(*r.seed) : json(nullptr));
    return "Mock answer " + sha256_hex(key.dump()).substr(0, 12);
  };
}

ChatBehavior echo_first_context() {
  return [fallback = digest_reply()](const ChatRequest& r) {
    for (const auto& m : r.messages) {
      if (m.role != Role::system) continue;
      const std::string_view text = m.content;
      const std::string marker = std::string(prompts::kRaider) + " ";
      if (text.substr(0, marker.size()) != marker) continue;
      const auto end = text.rfind(" Question: ");
      if (end == std::string_view::npos || end < marker.size()) continue;
      const std::string_view context = text.substr(marker.size(), end - marker.size());
      return std::string(context.substr(0, context.find(prompts::kContextSeparator)));
    }
    return fallback(r);
  };
}

ScriptedReplies::ScriptedReplies(std::vector<Rule> rules, std::string fallback,
                                 std::vector<int> statuses)
    : rules_(std::move(rules)),
      cursor_(rules_.size(), 0),
      fallback_(std::move(fallback)),
      statuses_(std::move(statuses)) {
  for (const auto& r : rules_)
    if (r.replies.empty()) throw ConfigError("scripted mock: rule '" + r.contains + "' has no replies");
}

std::shared_ptr<ScriptedReplies> ScriptedReplies::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    std::vector<Rule> rules;
    for (const auto& r : j.value("rules", json::array())) {
      Rule rule{r.at("contains").get<std::string>(), {}};
      if (r.contains("replies"))
        rule.replies = r["replies"].get<std::vector<std::string>>();
      else
        rule.replies.push_back(r.at("reply").get<std::string>());
      rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedReplies>(std::move(rules), j.value("default", std::string()),
                                             j.value("statuses", std::vector<int>{}));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scripted mock: ") + e.what());
  }
}

std::shared_ptr<ScriptedReplies> ScriptedReplies::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scripted mock: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ScriptedReplies::reply(const ChatRequest& request) {
  const std::string text = joined_contents(request);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (text.find(rules_[i].contains) == std::string::npos) continue;
    const auto& replies = rules_[i].replies;
    const std::size_t at = std::min(cursor_[i], replies.size() - 1);
    ++cursor_[i];
    return replies[at];
  }
  return fallback_;
}

ChatBehavior scripted(std::shared_ptr<ScriptedReplies> script) {
  return [script = std::move(script)](const ChatRequest& r) { return script->reply(r); };
}

std::shared_ptr<MockLlmService> MockLlmService::create() {
  return std::shared_ptr<MockLlmService>(new MockLlmService());
}

void MockLlmService::set_chat_behavior(ChatBehavior behavior) {
  std::lock_guard lock(mutex_);
  chat_ = std::move(behavior);
}

void MockLlmService::script_statuses(std::vector<int> statuses) {
  std::lock_guard lock(mutex_);
  statuses_.assign(statuses.begin(), statuses.end());
}

void MockLlmService::set_ocr_behavior(std::function<std::string(std::string_view)> behavior) {
  std::lock_guard lock(mutex_);
  ocr_ = std::move(behavior);
}

void MockLlmService::set_text_embedding_dim(std::size_t dim) {
  std::lock_guard lock(mutex_);
  text_dim_ = dim;
}

void MockLlmService::set_patch_embedding_dim(std::size_t dim) {
  std::lock_guard lock(mutex_);
  patch_dim_ = dim;
}

std::size_t MockLlmService::call_count(std::string_view path) const {
  std::lock_guard lock(mutex_);
  const auto it = calls_.find(path);
  return it == calls_.end() ? 0 : it->second;
}

std::vector<ChatRequest> MockLlmService::chat_requests() const {
  std::lock_guard lock(mutex_);
  return chat_log_;
}

std::shared_ptr<Transport> MockLlmService::transport() {
  return std::make_shared<HandlerTransport>(
      [self = shared_from_this()](std::string_view path, std::string_view body) {
        return self->handle(path, body);
      });
}

HttpResponse MockLlmService::handle(std::string_view path, std::string_view body) {
  std::size_t text_dim = 0, patch_dim = 0;
  std::function<std::string(std::string_view)> ocr;
  {
    std::lock_guard lock(mutex_);
    ++calls_[std::string(path)];
    if (!statuses_.empty()) {
      const int status = statuses_.front();
      statuses_.pop_front();
      if (status != 200) return error_response(status, "scripted failure");
    }
    text_dim = text_dim_;
    patch_dim = patch_dim_;
    ocr = ocr_;
  }

  try {
    if (path == kChatPath) return handle_chat(body);
    if (path == kEmbeddingsPath) {
      const json req = json::parse(body);
      json data = json::array();
      std::size_t index = 0;
      for (const auto& input : req.at("input"))
        data.push_back({{"index", index++},
                        {"embedding", hashed_text_embedding(input.get<std::string>(), text_dim)}});
      return {200, json{{"data", data}, {"model", req.value("model", "mock")}}.dump()};
    }
    if (path == "/ocr") {
      const std::string text = ocr(body);
      return {200, json{{"text", text}}.dump()};
    }
    if (path == "/embed") {
      const json req = json::parse(body);
      const auto key = patch_embedding_key(req.at("slide_id").get<std::string>(),
                                           req.at("x").get<long>(), req.at("y").get<long>(), 0);
      return {200, json{{"embedding", seeded_unit_vector(key, patch_dim)}}.dump()};
    }
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  } catch (const FormatError& e) {
    return error_response(400, e.what());
  }
  return error_response(404, "no such endpoint");
}

HttpResponse MockLlmService::handle_chat(std::string_view body) {
  const ChatRequest request = parse_chat_request(body);
  ChatBehavior behavior;
  {
    std::lock_guard lock(mutex_);
    chat_log_.push_back(request);
    behavior = chat_;
  }
  ChatResponse response;
  response.content = behavior(request);
  response.finish_reason = "stop";
  response.usage.prompt_tokens = word_count(joined_contents(request));
  response.usage.completion_tokens = word_count(response.content);
  response.usage.total_tokens = response.usage.prompt_tokens + response.usage.completion_tokens;
  return {200, serialize(response)};
}

MockServer::MockServer(std::shared_ptr<MockLlmService> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  server_->Post(".*", [svc = service_](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = svc->handle(req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw ConfigError("mock server: could not bind a loopback port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return fmt::format("http://127.0.0.1:{}", port_); }

}  // namespace slidekit::llm
