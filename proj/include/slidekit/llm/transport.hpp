// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace slidekit::llm {

/// status 0 means no HTTP response arrived (refused, reset, timed out).
struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One POST against a service. Implementations must be safe to call from
/// several threads at once.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(std::string_view path, std::string_view body,
                            std::string_view content_type) = 0;
};

/// Real HTTP(S) transport. `base_url` may carry a path prefix
/// ("https://host:8443/api"); `token` is sent as a bearer credential.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url, std::string token = {},
                         std::chrono::milliseconds timeout = std::chrono::seconds(120));
  HttpResponse post(std::string_view path, std::string_view body,
                    std::string_view content_type) override;

 private:
  std::string origin_;
  std::string prefix_;
  std::string token_;
  std::chrono::milliseconds timeout_;
};

using Handler = std::function<HttpResponse(std::string_view path, std::string_view body)>;

/// Calls a handler in-process, same wire bodies as HTTP but no socket.
class HandlerTransport final : public Transport {
 public:
  explicit HandlerTransport(Handler handler) : handler_(std::move(handler)) {}
  HttpResponse post(std::string_view path, std::string_view body, std::string_view) override {
    return handler_(path, body);
  }

 private:
  Handler handler_;
};

struct RetryPolicy {
  int max_attempts = 3;
  /// Delay before retry n (1-based) is backoff · 2^(n-1).
  std::chrono::milliseconds backoff{200};
};

/// POSTs until a 2xx arrives. 4xx throws RequestError immediately; 5xx,
/// timeouts and other statuses are retried, then TransportError carries the
/// last status. `attempts` (optional) receives the number of tries made.
HttpResponse post_with_retry(Transport& transport, std::string_view path, std::string_view body,
                             std::string_view content_type, const RetryPolicy& policy,
                             int* attempts = nullptr);

}  // namespace slidekit::llm
