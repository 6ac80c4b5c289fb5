#include "tandem/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tandem/digest.hpp"
#include "tandem/error.hpp"
#include "tandem/parallel.hpp"

namespace tandem {
namespace {

constexpr std::pair<EndpointRole, std::string_view> kRoleNames[] = {
    {EndpointRole::Generator, "generator"},
    {EndpointRole::AnswerJudge, "answer_judge"},
    {EndpointRole::PathScorer, "path_scorer"},
    {EndpointRole::Reasoner, "reasoner"},
    {EndpointRole::Summarizer, "summarizer"},
};

// Releases a gateway slot and the in-flight counter on scope exit.
class InFlightGuard {
 public:
  InFlightGuard(std::counting_semaphore<>& slots, std::atomic<std::size_t>& counter)
      : slots_(slots), counter_(counter) {
    slots_.acquire();
    now_ = counter_.fetch_add(1) + 1;
  }
  ~InFlightGuard() {
    counter_.fetch_sub(1);
    slots_.release();
  }
  InFlightGuard(const InFlightGuard&) = delete;
  InFlightGuard& operator=(const InFlightGuard&) = delete;

  std::size_t now() const { return now_; }

 private:
  std::counting_semaphore<>& slots_;
  std::atomic<std::size_t>& counter_;
  std::size_t now_ = 0;
};

}  // namespace

std::string_view to_string(EndpointRole role) {
  for (const auto& [value, name] : kRoleNames) {
    if (value == role) return name;
  }
  return "unknown";
}

EndpointRole endpoint_role_from_string(std::string_view text) {
  for (const auto& [value, name] : kRoleNames) {
    if (name == text) return value;
  }
  throw ConfigError("unknown endpoint role '" + std::string(text) + "'");
}

void ModelEndpoint::validate() const {
  if (name.empty()) throw ConfigError("endpoint name must be non-empty");
  if (!(timeout_s > 0.0)) throw ConfigError("endpoint '" + name + "': timeout must be > 0");
  if (max_retries < 0) throw ConfigError("endpoint '" + name + "': max_retries must be >= 0");
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be > 0");
}

std::string ChatExchange::prompt_text() const {
  std::string text;
  for (const auto& message : messages) {
    if (!text.empty()) text.push_back('\n');
    text += message.text;
  }
  return text;
}

ChatExchange make_exchange(std::string text, std::vector<std::string> media,
                           GenerationParams params) {
  ChatExchange exchange;
  exchange.messages.push_back({"user", std::move(text), std::move(media)});
  exchange.params = params;
  return exchange;
}

Json canonical_request(const ChatExchange& exchange) {
  Json messages = Json::array();
  for (const auto& m : exchange.messages) {
    messages.push_back({{"role", m.role}, {"text", m.text}, {"media", m.media_refs}});
  }
  Json params = {{"temperature", exchange.params.temperature},
                 {"top_p", exchange.params.top_p},
                 {"max_tokens", exchange.params.max_tokens}};
  if (exchange.params.seed) params["seed"] = *exchange.params.seed;
  return {{"messages", std::move(messages)}, {"params", std::move(params)}};
}

std::string fingerprint(const ChatExchange& exchange) {
  return sha256_hex(canonical_dump(canonical_request(exchange)));
}

ModelGateway::ModelGateway(std::vector<ModelEndpoint> endpoints,
                           std::shared_ptr<Transport> transport, GatewayOptions options)
    : endpoints_(std::move(endpoints)),
      transport_(std::move(transport)),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(options_.max_in_flight, 1))),
      jitter_rng_(options_.seed) {
  if (!transport_) throw ConfigError("gateway requires a transport");
  for (std::size_t i = 0; i < endpoints_.size(); ++i) {
    endpoints_[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (endpoints_[j].name == endpoints_[i].name) {
        throw ConfigError("duplicate endpoint name '" + endpoints_[i].name + "'");
      }
    }
  }
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

const ModelEndpoint& ModelGateway::endpoint(std::string_view name) const {
  for (const auto& ep : endpoints_) {
    if (ep.name == name) return ep;
  }
  throw ConfigError("no endpoint named '" + std::string(name) + "'");
}

const ModelEndpoint& ModelGateway::endpoint_for(EndpointRole role) const {
  for (const auto& ep : endpoints_) {
    if (ep.role == role) return ep;
  }
  throw ConfigError("no endpoint with role '" + std::string(to_string(role)) + "'");
}

std::chrono::milliseconds ModelGateway::backoff_delay(int retry) {
  const double ceiling =
      std::min(static_cast<double>(options_.backoff_cap.count()),
               static_cast<double>(options_.backoff_base.count()) *
                   std::pow(options_.backoff_factor, retry));
  double draw = 0.0;
  {
    std::lock_guard lock(mutex_);
    draw = jitter_rng_.uniform01();
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::floor(draw * ceiling)));
}

TransportReply ModelGateway::send_once(const ModelEndpoint& endpoint,
                                       const ChatExchange& exchange) {
  InFlightGuard guard(slots_, in_flight_);
  {
    std::lock_guard lock(mutex_);
    ++stats_.attempts;
    stats_.peak_in_flight = std::max(stats_.peak_in_flight, guard.now());
  }
  return transport_->send(endpoint, exchange);
}

ChatExchange ModelGateway::complete(const ModelEndpoint& endpoint, ChatExchange exchange) {
  if (exchange.messages.empty()) throw PreconditionError("exchange has no messages");
  exchange.response_text.reset();
  for (int attempt = 0;; ++attempt) {
    try {
      TransportReply reply = send_once(endpoint, exchange);
      exchange.response_text = std::move(reply.text);
      exchange.usage = reply.usage;
      std::lock_guard lock(mutex_);
      ++stats_.successes;
      ++stats_.calls_by_endpoint[endpoint.name];
      return exchange;
    } catch (const NetworkError& e) {
      if (attempt >= endpoint.max_retries) {
        {
          std::lock_guard lock(mutex_);
          ++stats_.failures;
        }
        throw NetworkError(endpoint.name + ": giving up after " + std::to_string(attempt + 1) +
                           " attempts: " + e.what());
      }
      options_.sleep(backoff_delay(attempt));
    } catch (const Error&) {
      std::lock_guard lock(mutex_);
      ++stats_.failures;
      throw;
    }
  }
}

std::vector<CallResult> ModelGateway::complete_batch(const ModelEndpoint& endpoint,
                                                     std::vector<ChatExchange> exchanges,
                                                     std::size_t parallelism) {
  if (parallelism < 1) throw PreconditionError("parallelism must be >= 1");
  std::vector<CallResult> results(exchanges.size());
  parallel_for(exchanges.size(), parallelism, [&](std::size_t i) {
    try {
      results[i].exchange = complete(endpoint, exchanges[i]);
    } catch (const std::exception& e) {
      results[i].exchange = std::move(exchanges[i]);
      results[i].error = std::current_exception();
      results[i].error_message = e.what();
    }
  });
  return results;
}

GatewayStats ModelGateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

}  // namespace tandem
