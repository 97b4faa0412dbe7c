// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "slidekit/llm/transport.hpp"
#include "slidekit/numerics/sampling.hpp"

namespace slidekit::llm {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
/// Throws FormatError for anything but "system", "user", "assistant".
Role parse_role(std::string_view text);

struct ChatMessage {
  Role role;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  double top_p = 0.95;
  std::size_t max_tokens = 128;
  std::optional<std::int64_t> seed;
  /// Not part of the base wire format; sent under "extensions" only when
  /// the backend is configured to accept it.
  std::optional<std::size_t> top_k;

  static ChatRequest with_generation(std::string model, std::vector<ChatMessage> messages,
                                     const GenerationConfig& gen);
  /// Throws FormatError unless there is at least one user message.
  void validate() const;
  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Canonical JSON body: sorted keys, no insignificant whitespace.
std::string serialize(const ChatRequest& request, bool include_top_k);
ChatRequest parse_chat_request(std::string_view body);

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t total_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
  Usage usage;
};

std::string serialize(const ChatResponse& response);
ChatResponse parse_chat_response(std::string_view body);

inline constexpr std::string_view kChatPath = "/v1/chat/completions";
inline constexpr std::string_view kEmbeddingsPath = "/v1/embeddings";

struct ClientOptions {
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  bool supports_top_k = false;
};

/// Chat-completion client. Thread-safe; at most `max_in_flight` requests are
/// outstanding at once, extra callers block.
class ChatClient {
 public:
  explicit ChatClient(std::shared_ptr<Transport> transport, ClientOptions options = {});

  ChatResponse chat(const ChatRequest& request) const;
  const ClientOptions& options() const noexcept { return options_; }

 private:
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  mutable std::atomic<bool> warned_top_k_{false};
};

/// Client for POST /v1/embeddings.
class EmbeddingClient {
 public:
  EmbeddingClient(std::shared_ptr<Transport> transport, std::string model,
                  RetryPolicy retry = {});
  std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) const;
  const std::string& model() const noexcept { return model_; }

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  RetryPolicy retry_;
};

}  // namespace slidekit::llm
