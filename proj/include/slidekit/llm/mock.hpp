// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic stand-ins for every remote service the toolkit talks to:
// chat completions, text embeddings, OCR, and the patch feature service.
// The same handler backs an in-process transport and a loopback HTTP server.

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "slidekit/llm/chat.hpp"

namespace httplib {
class Server;
}

namespace slidekit::llm {

using ChatBehavior = std::function<std::string(const ChatRequest&)>;

/// "Mock answer <12 hex digits>": a pure function of (messages, seed).
ChatBehavior digest_reply();

/// Returns the first chunk of the retrieved context embedded in the system
/// prompt; falls back to digest_reply() when no context block is present.
ChatBehavior echo_first_context();

/// Rule-driven replies loaded from JSON:
///   {"rules": [{"contains": "...", "replies": ["first", "then"]}, ...],
///    "default": "...", "statuses": [500, 200]}
/// Rules match against all message contents joined by newlines; the first
/// matching rule wins. A rule's replies are consumed in order and the last
/// one repeats. "statuses" (optional) scripts HTTP statuses for the first
/// calls before normal replies.
class ScriptedReplies {
 public:
  struct Rule {
    std::string contains;
    std::vector<std::string> replies;
  };

  ScriptedReplies(std::vector<Rule> rules, std::string fallback, std::vector<int> statuses = {});
  static std::shared_ptr<ScriptedReplies> from_json(std::string_view text);
  static std::shared_ptr<ScriptedReplies> load(const std::string& path);

  std::string reply(const ChatRequest& request);
  const std::vector<int>& statuses() const noexcept { return statuses_; }

 private:
  std::vector<Rule> rules_;
  std::vector<std::size_t> cursor_;
  std::string fallback_;
  std::vector<int> statuses_;
  std::mutex mutex_;
};

ChatBehavior scripted(std::shared_ptr<ScriptedReplies> script);

/// Serves /v1/chat/completions, /v1/embeddings, /ocr and /embed.
class MockLlmService : public std::enable_shared_from_this<MockLlmService> {
 public:
  static std::shared_ptr<MockLlmService> create();

  void set_chat_behavior(ChatBehavior behavior);
  /// Statuses returned, one per request, before any normal handling.
  void script_statuses(std::vector<int> statuses);
  void set_ocr_behavior(std::function<std::string(std::string_view bytes)> behavior);
  void set_text_embedding_dim(std::size_t dim);
  void set_patch_embedding_dim(std::size_t dim);

  HttpResponse handle(std::string_view path, std::string_view body);
  std::size_t call_count(std::string_view path) const;
  std::vector<ChatRequest> chat_requests() const;

  /// In-process transport bound to this service.
  std::shared_ptr<Transport> transport();

 private:
  MockLlmService() = default;
  HttpResponse handle_chat(std::string_view body);

  mutable std::mutex mutex_;
  ChatBehavior chat_ = digest_reply();
  std::function<std::string(std::string_view)> ocr_ = [](std::string_view b) {
    return std::string(b);
  };
  std::deque<int> statuses_;
  std::map<std::string, std::size_t, std::less<>> calls_;
  std::vector<ChatRequest> chat_log_;
  std::size_t text_dim_ = 64;
  std::size_t patch_dim_ = 512;
};

/// Loopback HTTP server in front of a MockLlmService, on an ephemeral port.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<MockLlmService> service);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const noexcept { return port_; }
  std::string base_url() const;

 private:
  std::shared_ptr<MockLlmService> service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace slidekit::llm
