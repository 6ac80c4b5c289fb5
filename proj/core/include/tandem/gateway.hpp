#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "tandem/jsonl.hpp"
#include "tandem/rng.hpp"

namespace tandem {

enum class EndpointRole { Generator, AnswerJudge, PathScorer, Reasoner, Summarizer };

std::string_view to_string(EndpointRole role);
EndpointRole endpoint_role_from_string(std::string_view text);  // ConfigError

struct ModelEndpoint {
  std::string name;
  std::string base_url;  // e.g. http://localhost:8000/v1
  EndpointRole role = EndpointRole::Generator;
  std::string model;     // value sent as "model"; defaults to name when empty
  double timeout_s = 120.0;
  int max_retries = 2;

  void validate() const;  // ConfigError
};

struct GenerationParams {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 4096;
  std::optional<std::int64_t> seed;

  void validate() const;  // ConfigError
  bool operator==(const GenerationParams&) const = default;
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string text;
  std::vector<std::string> media_refs;  // opaque URIs, never decoded

  bool operator==(const ChatMessage&) const = default;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatExchange {
  std::vector<ChatMessage> messages;
  GenerationParams params;
  std::optional<std::string> response_text;  // set iff the call succeeded
  TokenUsage usage;

  /// Concatenated text of all messages; convenient for prompt inspection.
  std::string prompt_text() const;
};

/// Builds a single-user-message exchange.
ChatExchange make_exchange(std::string text, std::vector<std::string> media,
                           GenerationParams params);

/// Canonical request document hashed by fingerprint(): messages + params only.
Json canonical_request(const ChatExchange& exchange);
/// Hex SHA-256 of canonical_dump(canonical_request(exchange)).
std::string fingerprint(const ChatExchange& exchange);

struct TransportReply {
  std::string text;
  TokenUsage usage;
};

/// One request/response round trip. Implementations throw NetworkError for
/// transient failures (retried by the gateway), ProtocolError for malformed
/// replies and MockMiss when a scripted mock has no entry.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const ModelEndpoint& endpoint, const ChatExchange& exchange) = 0;
};

/// OpenAI-style POST {base_url}/chat/completions over HTTP.
/// The bearer token, if any, is read from TANDEM_API_KEY.
class HttpTransport final : public Transport {
 public:
  HttpTransport();
  TransportReply send(const ModelEndpoint& endpoint, const ChatExchange& exchange) override;

 private:
  std::string api_key_;
};

Json build_chat_request(const ModelEndpoint& endpoint, const ChatExchange& exchange);
TransportReply parse_chat_reply(std::string_view body);  // ProtocolError

enum class ExhaustionPolicy { Error, RepeatLast };

/// A scripted reply. Either text, or an injected failure.
struct MockResponse {
  enum class Kind { Text, NetworkFailure, ProtocolFailure };
  Kind kind = Kind::Text;
  std::string text;

  bool operator==(const MockResponse&) const = default;
};

/// One mock record. Matches a request when every present selector matches:
/// an exact fingerprint, an endpoint name, and/or a set of substrings that
/// must all occur in the prompt text.
struct MockEntry {
  std::optional<std::string> fingerprint;
  std::optional<std::string> endpoint;
  std::vector<std::string> contains;
  std::vector<MockResponse> responses;
  std::optional<ExhaustionPolicy> on_exhausted;
};

/// Canned responses loaded from JSONL. Entries are tried in file order and
/// the first match wins. Each (entry, fingerprint) pair keeps its own call
/// index, so the n-th identical request always receives the n-th response.
struct MockScript {
  std::vector<MockEntry> entries;
  ExhaustionPolicy exhaustion = ExhaustionPolicy::Error;

  static MockScript from_jsonl(const std::filesystem::path& path);
  static MockScript from_jsonl_text(std::string_view text, std::string_view source = "<mock>");
};

struct CapturedRequest {
  std::string endpoint;
  std::string fingerprint;
  std::string prompt;
};

class MockTransport final : public Transport {
 public:
  explicit MockTransport(MockScript script);
  TransportReply send(const ModelEndpoint& endpoint, const ChatExchange& exchange) override;

  std::vector<CapturedRequest> captured() const;
  std::size_t call_count(std::string_view endpoint) const;
  std::size_t total_calls() const;

 private:
  const MockScript script_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::size_t, std::string>, std::size_t> call_index_;
  std::vector<CapturedRequest> captured_;
};

struct GatewayOptions {
  /// Gateway-wide cap on concurrently outstanding transport calls.
  std::size_t max_in_flight = 16;
  std::chrono::milliseconds backoff_base{250};
  double backoff_factor = 2.0;
  std::chrono::milliseconds backoff_cap{30'000};
  std::uint64_t seed = 0;  // drives backoff jitter
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleep_for
};

/// Per-item outcome of complete_batch.
struct CallResult {
  ChatExchange exchange;
  std::exception_ptr error;
  std::string error_message;

  bool ok() const { return error == nullptr; }
};

struct GatewayStats {
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t peak_in_flight = 0;
  std::map<std::string, std::size_t> calls_by_endpoint;  // successful calls
};

/// Uniform client over the configured endpoints. Safe for concurrent use.
class ModelGateway {
 public:
  ModelGateway(std::vector<ModelEndpoint> endpoints, std::shared_ptr<Transport> transport,
               GatewayOptions options = {});

  const ModelEndpoint& endpoint(std::string_view name) const;
  /// First endpoint with `role` in roster order. ConfigError if none.
  const ModelEndpoint& endpoint_for(EndpointRole role) const;
  const std::vector<ModelEndpoint>& endpoints() const { return endpoints_; }

  /// Sends the exchange, retrying NetworkError up to endpoint.max_retries
  /// times with exponential backoff and full jitter.
  ChatExchange complete(const ModelEndpoint& endpoint, ChatExchange exchange);

  /// Results are index-aligned with the input; failures are per item. At most
  /// `parallelism` of these requests are in flight at once.
  std::vector<CallResult> complete_batch(const ModelEndpoint& endpoint,
                                         std::vector<ChatExchange> exchanges,
                                         std::size_t parallelism);

  /// Delay before retry number `retry` (0-based), drawn from the seeded RNG.
  std::chrono::milliseconds backoff_delay(int retry);

  GatewayStats stats() const;

 private:
  TransportReply send_once(const ModelEndpoint& endpoint, const ChatExchange& exchange);

  std::vector<ModelEndpoint> endpoints_;
  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  std::counting_semaphore<> slots_;

  mutable std::mutex mutex_;
  Rng jitter_rng_;
  GatewayStats stats_;
  std::atomic<std::size_t> in_flight_{0};
};

}  // namespace tandem
