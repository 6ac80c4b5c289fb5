#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "fixtures.hpp"
#include "httplib.h"
#include "tandem/error.hpp"
#include "tandem/gateway.hpp"

using namespace tandem;
using namespace tandem::testing;

namespace {

ChatExchange ask(const std::string& text, double temperature = 0.0) {
  return make_exchange(text, {}, {.temperature = temperature, .top_p = 1.0, .max_tokens = 64, .seed = 1});
}

/// Counts concurrent sends and fails the items whose prompt contains "fail".
class SlowTransport final : public Transport {
 public:
  TransportReply send(const ModelEndpoint&, const ChatExchange& exchange) override {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    const std::string prompt = exchange.prompt_text();
    if (prompt.find("fail") != std::string::npos) throw ProtocolError("scripted failure");
    return {"echo:" + prompt, {}};
  }
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
};

}  // namespace

TEST(Gateway, MockEchoByFingerprint) {
  const ChatExchange request = ask("what is six times seven?");
  const Json entry = {{"fingerprint", fingerprint(request)}, {"responses", {"42"}}};
  auto mock = std::make_shared<MockTransport>(MockScript::from_jsonl_text(entry.dump()));
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, mock, fast_options());
  const ChatExchange reply = gw.complete(gw.endpoint("gen"), request);
  EXPECT_EQ(reply.response_text, "42");
  EXPECT_EQ(reply.messages, request.messages);
}

TEST(Gateway, FingerprintCoversMessagesAndParams) {
  EXPECT_EQ(fingerprint(ask("a")), fingerprint(ask("a")));
  EXPECT_NE(fingerprint(ask("a")), fingerprint(ask("b")));
  EXPECT_NE(fingerprint(ask("a", 0.0)), fingerprint(ask("a", 0.5)));
  ChatExchange with_media = ask("a");
  with_media.messages[0].media_refs = {"file://x.png"};
  EXPECT_NE(fingerprint(ask("a")), fingerprint(with_media));
}

TEST(Gateway, RepeatLastGivesIdenticalResponses) {
  auto mock = make_mock({mock_entry("gen", {"hello"}, {"first", "second"})});
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, mock, fast_options());
  const auto& ep = gw.endpoint("gen");
  EXPECT_EQ(gw.complete(ep, ask("hello")).response_text, "first");
  EXPECT_EQ(gw.complete(ep, ask("hello")).response_text, "second");
  EXPECT_EQ(gw.complete(ep, ask("hello")).response_text, "second");
  EXPECT_EQ(gw.complete(ep, ask("hello")).response_text, "second");
  // A different request starts its own sequence.
  EXPECT_EQ(gw.complete(ep, ask("hello there")).response_text, "first");
}

TEST(Gateway, ExhaustionErrorAndMockMiss) {
  auto mock = make_mock({mock_entry("gen", {"hello"}, {"only"})}, false);
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, mock, fast_options());
  const auto& ep = gw.endpoint("gen");
  EXPECT_EQ(gw.complete(ep, ask("hello")).response_text, "only");
  EXPECT_THROW(gw.complete(ep, ask("hello")), MockMiss);
  EXPECT_THROW(gw.complete(ep, ask("unknown")), MockMiss);
}

TEST(Gateway, FirstMatchingEntryWins) {
  auto mock = make_mock({mock_entry("gen", {"alpha", "beta"}, {"both"}),
                         mock_entry("gen", {"alpha"}, {"alpha only"}),
                         mock_entry("judge", {}, {"judge"})});
  ModelGateway gw({endpoint("gen", EndpointRole::Generator),
                   endpoint("judge", EndpointRole::AnswerJudge)},
                  mock, fast_options());
  EXPECT_EQ(gw.complete(gw.endpoint("gen"), ask("alpha beta")).response_text, "both");
  EXPECT_EQ(gw.complete(gw.endpoint("gen"), ask("alpha gamma")).response_text, "alpha only");
  EXPECT_EQ(gw.complete(gw.endpoint("judge"), ask("alpha beta")).response_text, "judge");
}

TEST(Gateway, NetworkErrorsAreRetriedThenRaised) {
  auto mock = make_mock(
      {mock_entry("gen", {"flaky"}, {Json{{"error", "network"}}, Json{{"error", "network"}}, "ok"}),
       mock_entry("gen", {"down"}, {Json{{"error", "network"}}})});
  std::vector<std::chrono::milliseconds> sleeps;
  GatewayOptions opts;
  opts.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, mock, opts);
  EXPECT_EQ(gw.complete(gw.endpoint("gen"), ask("flaky")).response_text, "ok");
  EXPECT_EQ(sleeps.size(), 2u);

  EXPECT_THROW(gw.complete(gw.endpoint("gen"), ask("down")), NetworkError);
  EXPECT_EQ(mock->total_calls(), 3u + 3u);  // 1 + max_retries attempts each
}

TEST(Gateway, ProtocolErrorsAreNotRetried) {
  auto mock = make_mock({mock_entry("gen", {}, {Json{{"error", "protocol"}}})});
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, mock, fast_options());
  EXPECT_THROW(gw.complete(gw.endpoint("gen"), ask("x")), ProtocolError);
  EXPECT_EQ(mock->total_calls(), 1u);
}

TEST(Gateway, BackoffIsBoundedAndSeeded) {
  auto mock = make_mock({});
  GatewayOptions opts = fast_options();
  opts.seed = 99;
  ModelGateway a({endpoint("gen", EndpointRole::Generator)}, mock, opts);
  ModelGateway b({endpoint("gen", EndpointRole::Generator)}, mock, opts);
  for (int retry = 0; retry < 12; ++retry) {
    const auto da = a.backoff_delay(retry);
    EXPECT_EQ(da, b.backoff_delay(retry));
    const double ceiling = std::min(30000.0, 250.0 * std::pow(2.0, retry));
    EXPECT_GE(da.count(), 0);
    EXPECT_LT(static_cast<double>(da.count()), ceiling);
  }
}

TEST(Gateway, BatchPreservesOrderAndIsolatesFailures) {
  auto transport = std::make_shared<SlowTransport>();
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, transport, fast_options());
  std::vector<ChatExchange> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(ask(i == 6 ? "fail 6" : "item " + std::to_string(i)));
  const auto results = gw.complete_batch(gw.endpoint("gen"), batch, 4);
  ASSERT_EQ(results.size(), 10u);
  int ok = 0;
  for (int i = 0; i < 10; ++i) {
    if (i == 6) {
      EXPECT_FALSE(results[i].ok());
      EXPECT_FALSE(results[i].exchange.response_text.has_value());
      continue;
    }
    ASSERT_TRUE(results[i].ok());
    EXPECT_EQ(*results[i].exchange.response_text, "echo:item " + std::to_string(i));
    ++ok;
  }
  EXPECT_EQ(ok, 9);
  EXPECT_LE(transport->peak.load(), 4);
}

TEST(Gateway, BatchWithParallelismOneMatchesSequentialCalls) {
  auto transport = std::make_shared<SlowTransport>();
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, transport, fast_options());
  std::vector<ChatExchange> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(ask("item " + std::to_string(i)));
  const auto results = gw.complete_batch(gw.endpoint("gen"), batch, 1);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(results[i].exchange.response_text,
              gw.complete(gw.endpoint("gen"), batch[i]).response_text);
  }
  EXPECT_EQ(transport->peak.load(), 1);
  EXPECT_TRUE(gw.complete_batch(gw.endpoint("gen"), {}, 3).empty());
  EXPECT_THROW(gw.complete_batch(gw.endpoint("gen"), batch, 0), PreconditionError);
}

TEST(Gateway, GatewayWideInFlightCap) {
  auto transport = std::make_shared<SlowTransport>();
  GatewayOptions opts = fast_options();
  opts.max_in_flight = 2;
  ModelGateway gw({endpoint("gen", EndpointRole::Generator)}, transport, opts);
  std::vector<ChatExchange> batch(16, ask("x"));
  gw.complete_batch(gw.endpoint("gen"), batch, 8);
  EXPECT_LE(transport->peak.load(), 2);
  EXPECT_LE(gw.stats().peak_in_flight, 2u);
}

TEST(Gateway, MockScriptRejectsBadRecords) {
  EXPECT_THROW(MockScript::from_jsonl_text(R"({"responses":["x"]})"), DataError);
  EXPECT_THROW(MockScript::from_jsonl_text(R"({"endpoint":"g","responses":[]})"), DataError);
  EXPECT_THROW(MockScript::from_jsonl_text(R"({"endpoint":"g","responses":["x"],"bogus":1})"),
               DataError);
  EXPECT_THROW(MockScript::from_jsonl_text("{broken"), DataError);
}

TEST(Gateway, ChatReplyParsing) {
  const auto reply = parse_chat_reply(
      R"({"choices":[{"message":{"role":"assistant","content":"hi"}}],
          "usage":{"prompt_tokens":3,"completion_tokens":1}})");
  EXPECT_EQ(reply.text, "hi");
  EXPECT_EQ(reply.usage.prompt_tokens, 3);
  EXPECT_THROW(parse_chat_reply("not json"), ProtocolError);
  EXPECT_THROW(parse_chat_reply(R"({"choices":[]})"), ProtocolError);
}

TEST(Gateway, RequestBodyCarriesMediaAndParams) {
  ModelEndpoint ep = endpoint("gen", EndpointRole::Generator);
  ep.model = "qwen-vl";
  ChatExchange ex = make_exchange("describe", {"file://a.png"}, {.temperature = 0.7, .top_p = 0.9, .max_tokens = 32, .seed = 5});
  const Json body = build_chat_request(ep, ex);
  EXPECT_EQ(body["model"], "qwen-vl");
  EXPECT_EQ(body["max_tokens"], 32);
  EXPECT_EQ(body["seed"], 5);
  EXPECT_NE(body.dump().find("file://a.png"), std::string::npos);
}

TEST(Gateway, ParamsValidation) {
  ModelEndpoint ep = endpoint("gen", EndpointRole::Generator);
  ep.timeout_s = 0;
  EXPECT_THROW(ep.validate(), ConfigError);
  EXPECT_THROW((GenerationParams{.temperature = -1, .top_p = 1, .max_tokens = 1, .seed = {}}).validate(),
               ConfigError);
  EXPECT_THROW((GenerationParams{.temperature = 1, .top_p = 0, .max_tokens = 1, .seed = {}}).validate(),
               ConfigError);
  EXPECT_THROW((GenerationParams{.temperature = 1, .top_p = 1, .max_tokens = 0, .seed = {}}).validate(),
               ConfigError);
  EXPECT_THROW(ModelGateway({endpoint("a", EndpointRole::Generator),
                             endpoint("a", EndpointRole::Reasoner)},
                            make_mock({}), fast_options()),
               ConfigError);
}

// ---------------------------------------------------------------------------
// HTTP transport against a local server.

class HttpGateway : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits_;
      last_body_ = req.body;
      if (n <= transient_failures_) {
        res.status = 503;
        return;
      }
      res.set_content(
          R"({"choices":[{"message":{"role":"assistant","content":"pong"}}],"usage":{"prompt_tokens":2,"completion_tokens":1}})",
          "application/json");
    });
    server_.Post("/bad/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<html>", "text/html");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  ModelEndpoint local(const std::string& path) const {
    ModelEndpoint ep = endpoint("remote", EndpointRole::Generator);
    ep.base_url = "http://127.0.0.1:" + std::to_string(port_) + path;
    ep.timeout_s = 5;
    return ep;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  int transient_failures_ = 0;
  std::string last_body_;
};

TEST_F(HttpGateway, RoundTripWithRetryOnTransientStatus) {
  transient_failures_ = 2;
  ModelGateway gw({local("/v1")}, std::make_shared<HttpTransport>(), fast_options());
  const ChatExchange reply = gw.complete(gw.endpoint("remote"), ask("ping"));
  EXPECT_EQ(reply.response_text, "pong");
  EXPECT_EQ(reply.usage.prompt_tokens, 2);
  EXPECT_EQ(hits_.load(), 3);
  EXPECT_NE(last_body_.find("\"ping\""), std::string::npos);
}

TEST_F(HttpGateway, MalformedReplyIsProtocolError) {
  ModelGateway gw({local("/bad")}, std::make_shared<HttpTransport>(), fast_options());
  EXPECT_THROW(gw.complete(gw.endpoint("remote"), ask("ping")), ProtocolError);
}

TEST(HttpTransportTest, UnreachableEndpointFailsAfterRetries) {
  // Bind and release a port so nothing listens there.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ModelEndpoint ep = endpoint("down", EndpointRole::Generator);
  ep.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  ep.timeout_s = 1;
  ep.max_retries = 2;
  int sleeps = 0;
  GatewayOptions opts;
  opts.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
  ModelGateway gw({ep}, std::make_shared<HttpTransport>(), opts);
  EXPECT_THROW(gw.complete(gw.endpoint("down"), ask("ping")), NetworkError);
  EXPECT_EQ(gw.stats().attempts, 3u);
  EXPECT_EQ(sleeps, 2);
}
