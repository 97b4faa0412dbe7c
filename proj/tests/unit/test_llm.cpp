// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <nlohmann/json.hpp>
#include <thread>

#include "slidekit/error.hpp"
#include "slidekit/llm/chat.hpp"
#include "slidekit/llm/mock.hpp"
#include "slidekit/prompts.hpp"

namespace slidekit::llm {
namespace {

using nlohmann::json;

constexpr RetryPolicy kFastRetry{3, std::chrono::milliseconds(0)};

ChatRequest simple_request(std::string text = "What is the primary diagnosis?") {
  ChatRequest r;
  r.model = "mock-model";
  r.messages = {{Role::system, "be brief"}, {Role::user, std::move(text)}};
  return r;
}

ChatClient fast_client(const std::shared_ptr<MockLlmService>& svc, bool top_k = false) {
  return ChatClient(svc->transport(), {kFastRetry, 4, top_k});
}

TEST(Chat, FixedTextReply) {
  auto svc = MockLlmService::create();
  svc->set_chat_behavior([](const ChatRequest&) { return "fixed reply"; });
  const auto resp = fast_client(svc).chat(simple_request());
  EXPECT_EQ(resp.content, "fixed reply");
  EXPECT_EQ(resp.finish_reason, "stop");
  EXPECT_EQ(resp.usage.completion_tokens, 2u);
}

TEST(Chat, RetriesServerErrorThenSucceeds) {
  auto svc = MockLlmService::create();
  svc->script_statuses({500, 200});
  int attempts = 0;
  const auto r = post_with_retry(*svc->transport(), kChatPath, serialize(simple_request(), false),
                                 "application/json", kFastRetry, &attempts);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(attempts, 2);
  EXPECT_EQ(svc->call_count(kChatPath), 2u);
}

TEST(Chat, ExhaustedRetriesCarryLastStatus) {
  auto svc = MockLlmService::create();
  svc->script_statuses({500, 500, 500, 500, 500});
  try {
    fast_client(svc).chat(simple_request());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(svc->call_count(kChatPath), 3u);
}

TEST(Chat, ClientErrorsAreNotRetried) {
  auto svc = MockLlmService::create();
  svc->script_statuses({404, 200});
  try {
    fast_client(svc).chat(simple_request());
    FAIL() << "expected RequestError";
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 404);
  }
  EXPECT_EQ(svc->call_count(kChatPath), 1u);
}

TEST(Chat, NoResponseIsRetried) {
  int calls = 0;
  HandlerTransport t([&](std::string_view, std::string_view) {
    return ++calls < 3 ? HttpResponse{0, {}} : HttpResponse{200, "{}"};
  });
  int attempts = 0;
  EXPECT_EQ(post_with_retry(t, "/x", "{}", "application/json", kFastRetry, &attempts).status, 200);
  EXPECT_EQ(attempts, 3);
}

TEST(Chat, RetryPolicyNeedsOneAttempt) {
  HandlerTransport t([](std::string_view, std::string_view) { return HttpResponse{200, "{}"}; });
  EXPECT_THROW(post_with_retry(t, "/x", "{}", "application/json", {0, {}}), ConfigError);
}

TEST(Chat, SerializationIsCanonical) {
  ChatRequest a = simple_request();
  a.seed = 7;
  ChatRequest b = simple_request();
  b.seed = 7;
  const std::string body = serialize(a, false);
  EXPECT_EQ(body, serialize(b, false));
  EXPECT_EQ(body,
            R"({"max_tokens":128,"messages":[{"content":"be brief","role":"system"},)"
            R"({"content":"What is the primary diagnosis?","role":"user"}],)"
            R"("model":"mock-model","seed":7,"temperature":0.7,"top_p":0.95})");
  EXPECT_EQ(parse_chat_request(body), a);
}

TEST(Chat, TopKOnlyUnderExtensionsWhenSupported) {
  const auto req = ChatRequest::with_generation("m", simple_request().messages, GenerationConfig{});
  ASSERT_TRUE(req.top_k.has_value());
  const json off = json::parse(serialize(req, false));
  const json on = json::parse(serialize(req, true));
  EXPECT_FALSE(off.contains("top_k"));
  EXPECT_FALSE(off.contains("extensions"));
  EXPECT_FALSE(on.contains("top_k"));
  EXPECT_EQ(on["extensions"]["top_k"], 50);

  auto svc = MockLlmService::create();
  fast_client(svc, true).chat(req);
  fast_client(svc, false).chat(req);
  const auto seen = svc->chat_requests();
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].top_k, std::optional<std::size_t>(50));
  EXPECT_FALSE(seen[1].top_k.has_value());
}

TEST(Chat, RequestWithoutUserMessageRejected) {
  ChatRequest r;
  r.model = "m";
  r.messages = {{Role::system, "only system"}};
  EXPECT_THROW(serialize(r, false), FormatError);
  EXPECT_THROW(parse_role("tool"), FormatError);
}

TEST(Chat, MalformedResponseIsFormatError) {
  EXPECT_THROW(parse_chat_response("not json"), FormatError);
  EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), FormatError);
  EXPECT_THROW(parse_chat_response(R"({"choices":[{"message":{"content":null}}]})"), FormatError);
}

TEST(MockLlm, DigestReplyIsPureInMessagesAndSeed) {
  auto behavior = digest_reply();
  ChatRequest a = simple_request();
  ChatRequest b = simple_request();
  b.temperature = 0.1;
  EXPECT_EQ(behavior(a), behavior(b));
  EXPECT_EQ(behavior(a).rfind("Mock answer ", 0), 0u);
  EXPECT_EQ(behavior(a).size(), std::string("Mock answer ").size() + 12);
  b.seed = 1;
  EXPECT_NE(behavior(a), behavior(b));
  EXPECT_NE(behavior(a), behavior(simple_request("other question")));
}

TEST(MockLlm, EchoFirstContextReturnsLeadingChunk) {
  ChatRequest r;
  r.model = "m";
  const std::string system = std::string(prompts::kRaider) + " first chunk text" +
                             std::string(prompts::kContextSeparator) +
                             "second chunk Question: nested" + " Question: What organ?";
  r.messages = {{Role::system, system}, {Role::user, "What organ?"}};
  EXPECT_EQ(echo_first_context()(r), "first chunk text");
  EXPECT_EQ(echo_first_context()(simple_request()), digest_reply()(simple_request()));
}

TEST(MockLlm, ScriptedRulesConsumeInOrder) {
  auto script = ScriptedReplies::from_json(R"({
    "rules": [{"contains": "diagnosis", "replies": ["one", "two"]},
              {"contains": "organ", "reply": "liver"}],
    "default": "fallback", "statuses": [503]})");
  EXPECT_EQ(script->statuses(), std::vector<int>{503});
  auto behavior = scripted(script);
  EXPECT_EQ(behavior(simple_request()), "one");
  EXPECT_EQ(behavior(simple_request()), "two");
  EXPECT_EQ(behavior(simple_request()), "two");
  EXPECT_EQ(behavior(simple_request("Which organ?")), "liver");
  EXPECT_EQ(behavior(simple_request("nothing")), "fallback");
  EXPECT_THROW(ScriptedReplies::from_json(R"({"rules": [{"contains": "x", "replies": []}]})"),
               ConfigError);
  EXPECT_THROW(ScriptedReplies::from_json("{"), ConfigError);
}

TEST(Embeddings, MockEndpointReturnsOneVectorPerInput) {
  auto svc = MockLlmService::create();
  svc->set_text_embedding_dim(16);
  EmbeddingClient client(svc->transport(), "embedder", kFastRetry);
  const auto v = client.embed({"tumor cells", "tumor cells", "normal stroma"});
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].size(), 16u);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NE(v[0], v[2]);
  EXPECT_TRUE(client.embed({}).empty());
}

TEST(Chat, InFlightRequestsAreBounded) {
  std::atomic<int> current{0}, peak{0};
  auto transport = std::make_shared<HandlerTransport>([&](std::string_view, std::string_view) {
    const int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --current;
    return HttpResponse{200, serialize(ChatResponse{"ok", "stop", {}})};
  });
  ChatClient client(transport, {kFastRetry, 2, false});
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] { EXPECT_EQ(client.chat(simple_request()).content, "ok"); });
  threads.clear();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(MockServer, WireRoundTripOverLoopback) {
  auto svc = MockLlmService::create();
  svc->set_chat_behavior([](const ChatRequest& r) { return "echo: " + r.messages.back().content; });
  MockServer server(svc);
  ASSERT_GT(server.port(), 0);
  ChatClient client(std::make_shared<HttpTransport>(server.base_url(), "secret-token"),
                    {kFastRetry, 4, false});
  EXPECT_EQ(client.chat(simple_request("hello")).content, "echo: hello");

  svc->script_statuses({500, 200});
  EXPECT_EQ(client.chat(simple_request("again")).content, "echo: again");
  EXPECT_EQ(svc->call_count(kChatPath), 3u);
}

TEST(MockServer, HttpTransportHonoursPathPrefix) {
  auto svc = MockLlmService::create();
  MockServer server(svc);
  HttpTransport t(server.base_url() + "/api/", "");
  const auto r = t.post("/v1/embeddings", R"({"model":"m","input":["a"]})", "application/json");
  // The mock only serves unprefixed paths, so the prefixed request must 404.
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(svc->call_count("/api/v1/embeddings"), 1u);
}

TEST(MockServer, UnreachableEndpointYieldsStatusZero) {
  int port = 0;
  {
    MockServer server(MockLlmService::create());
    port = server.port();
  }
  HttpTransport t("http://127.0.0.1:" + std::to_string(port), "", std::chrono::seconds(1));
  EXPECT_EQ(t.post("/v1/chat/completions", "{}", "application/json").status, 0);
  EXPECT_THROW(HttpTransport("localhost:80"), ConfigError);
}

}  // namespace
}  // namespace slidekit::llm
