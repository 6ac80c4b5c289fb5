#include <httplib.h>

#include <cstdlib>

#include "tandem/error.hpp"
#include "tandem/gateway.hpp"

namespace tandem {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

SplitUrl split_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) throw ConfigError("base_url lacks a scheme: " + base_url);
  const std::size_t path_start = base_url.find('/', scheme + 3);
  SplitUrl out;
  out.origin = base_url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

bool is_transient_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

}  // namespace

Json build_chat_request(const ModelEndpoint& endpoint, const ChatExchange& exchange) {
  Json messages = Json::array();
  for (const auto& m : exchange.messages) {
    if (m.media_refs.empty()) {
      messages.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    Json parts = Json::array();
    for (const auto& uri : m.media_refs) {
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", uri}}}});
    }
    parts.push_back({{"type", "text"}, {"text", m.text}});
    messages.push_back({{"role", m.role}, {"content", std::move(parts)}});
  }
  Json body = {{"model", endpoint.model.empty() ? endpoint.name : endpoint.model},
               {"messages", std::move(messages)},
               {"temperature", exchange.params.temperature},
               {"top_p", exchange.params.top_p},
               {"max_tokens", exchange.params.max_tokens},
               {"stream", false}};
  if (exchange.params.seed) body["seed"] = *exchange.params.seed;
  return body;
}

TransportReply parse_chat_reply(std::string_view body) {
  const Json doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ProtocolError("reply is not a JSON object");
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw ProtocolError("reply has no choices");
  }
  const Json& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw ProtocolError("reply choice has no message");
  }
  const Json& content = first["message"].value("content", Json());
  if (!content.is_string()) throw ProtocolError("reply message content is not a string");

  TransportReply reply;
  reply.text = content.get<std::string>();
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    reply.usage.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    reply.usage.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
  }
  return reply;
}

HttpTransport::HttpTransport() {
  if (const char* key = std::getenv("TANDEM_API_KEY")) api_key_ = key;
}

TransportReply HttpTransport::send(const ModelEndpoint& endpoint, const ChatExchange& exchange) {
  const SplitUrl url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  const auto whole = std::chrono::duration<double>(endpoint.timeout_s);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(whole);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string body = build_chat_request(endpoint, exchange).dump();
  auto result = client.Post(url.path + "/chat/completions", headers, body, "application/json");
  if (!result) {
    throw NetworkError(endpoint.name + ": " + httplib::to_string(result.error()));
  }
  if (is_transient_status(result->status)) {
    throw NetworkError(endpoint.name + ": HTTP " + std::to_string(result->status));
  }
  if (result->status != 200) {
    throw ProtocolError(endpoint.name + ": HTTP " + std::to_string(result->status) + ": " +
                        result->body.substr(0, 200));
  }
  return parse_chat_reply(result->body);
}

}  // namespace tandem
