// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include "slidekit/llm/transport.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

#include "slidekit/error.hpp"

namespace slidekit::llm {
namespace {

std::string snippet(std::string_view body) {
  constexpr std::size_t kMax = 200;
  return std::string(body.substr(0, kMax)) + (body.size() > kMax ? "..." : "");
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, std::string token,
                             std::chrono::milliseconds timeout)
    : token_(std::move(token)), timeout_(timeout) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint URL needs a scheme: '" + base_url + "'");
  const auto path_start = base_url.find('/', scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttpTransport::post(std::string_view path, std::string_view body,
                                 std::string_view content_type) {
  // One client per call keeps the transport shareable across threads.
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  if (!token_.empty()) client.set_bearer_token_auth(token_);
  const std::string full_path = prefix_ + std::string(path);
  auto res = client.Post(full_path, body.data(), body.size(), std::string(content_type));
  if (!res) {
    spdlog::debug("POST {}{} failed: {}", origin_, full_path, httplib::to_string(res.error()));
    return {0, {}};
  }
  return {res->status, res->body};
}

HttpResponse post_with_retry(Transport& transport, std::string_view path, std::string_view body,
                             std::string_view content_type, const RetryPolicy& policy,
                             int* attempts) {
  if (policy.max_attempts < 1) throw ConfigError("retry: max_attempts must be >= 1");
  int last_status = 0;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempts) *attempts = attempt;
    HttpResponse r = transport.post(path, body, content_type);
    if (r.status >= 200 && r.status < 300) return r;
    if (r.status >= 400 && r.status < 500)
      throw RequestError("POST " + std::string(path) + " rejected with status " +
                             std::to_string(r.status) + ": " + snippet(r.body),
                         r.status);
    last_status = r.status;
    spdlog::warn("POST {} attempt {}/{} failed with status {}", path, attempt,
                 policy.max_attempts, r.status);
    if (attempt < policy.max_attempts && policy.backoff.count() > 0)
      std::this_thread::sleep_for(policy.backoff * (1 << (attempt - 1)));
  }
  throw TransportError("POST " + std::string(path) + " failed after " +
                           std::to_string(policy.max_attempts) + " attempts (last status " +
                           std::to_string(last_status) + ")",
                       last_status, policy.max_attempts);
}

}  // namespace slidekit::llm
