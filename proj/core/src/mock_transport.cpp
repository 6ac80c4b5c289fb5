#include <algorithm>
#include <fstream>
#include <iterator>

#include "tandem/error.hpp"
#include "tandem/gateway.hpp"

namespace tandem {
namespace {

ExhaustionPolicy exhaustion_from_string(std::string_view text, std::string_view where) {
  if (text == "error") return ExhaustionPolicy::Error;
  if (text == "repeat_last") return ExhaustionPolicy::RepeatLast;
  throw DataError(std::string(where) + ": unknown exhaustion policy '" + std::string(text) + "'");
}

MockResponse response_from_json(const Json& doc, const std::string& where) {
  if (doc.is_string()) return {MockResponse::Kind::Text, doc.get<std::string>()};
  if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) {
    const auto kind = doc["error"].get<std::string>();
    if (kind == "network") return {MockResponse::Kind::NetworkFailure, {}};
    if (kind == "protocol") return {MockResponse::Kind::ProtocolFailure, {}};
  }
  throw DataError(where + ": response must be a string or {\"error\": \"network\"|\"protocol\"}");
}

MockEntry entry_from_json(const Json& doc, const std::string& where) {
  if (!doc.is_object()) throw DataError(where + ": mock record must be an object");
  MockEntry entry;
  for (const auto& [key, value] : doc.items()) {
    if (key == "fingerprint" && value.is_string()) {
      entry.fingerprint = value.get<std::string>();
    } else if (key == "endpoint" && value.is_string()) {
      entry.endpoint = value.get<std::string>();
    } else if (key == "contains" && value.is_array()) {
      for (const auto& s : value) {
        if (!s.is_string()) throw DataError(where + ": contains must hold strings");
        entry.contains.push_back(s.get<std::string>());
      }
    } else if (key == "responses" && value.is_array()) {
      for (const auto& r : value) entry.responses.push_back(response_from_json(r, where));
    } else if (key == "on_exhausted" && value.is_string()) {
      entry.on_exhausted = exhaustion_from_string(value.get<std::string>(), where);
    } else if (key == "comment") {
      // free-form annotation
    } else {
      throw DataError(where + ": unexpected key or type for '" + key + "'");
    }
  }
  if (entry.responses.empty()) throw DataError(where + ": responses must be non-empty");
  if (!entry.fingerprint && !entry.endpoint && entry.contains.empty()) {
    throw DataError(where + ": record needs fingerprint, endpoint or contains");
  }
  return entry;
}

}  // namespace

MockScript MockScript::from_jsonl_text(std::string_view text, std::string_view source) {
  MockScript script;
  for (const auto& line : parse_jsonl(text, source)) {
    const std::string where = std::string(source) + ":" + std::to_string(line.line_number);
    // A record holding only {"exhaustion": ...} sets the script default.
    if (line.value.is_object() && line.value.size() == 1 && line.value.contains("exhaustion")) {
      script.exhaustion = exhaustion_from_string(line.value["exhaustion"].get<std::string>(), where);
      continue;
    }
    script.entries.push_back(entry_from_json(line.value, where));
  }
  return script;
}

MockScript MockScript::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mock script " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_jsonl_text(text, path.string());
}

MockTransport::MockTransport(MockScript script) : script_(std::move(script)) {}

TransportReply MockTransport::send(const ModelEndpoint& endpoint, const ChatExchange& exchange) {
  const std::string fp = fingerprint(exchange);
  const std::string prompt = exchange.prompt_text();

  std::size_t entry_index = script_.entries.size();
  for (std::size_t i = 0; i < script_.entries.size(); ++i) {
    const MockEntry& e = script_.entries[i];
    if (e.fingerprint && *e.fingerprint != fp) continue;
    if (e.endpoint && *e.endpoint != endpoint.name) continue;
    const bool all_present = std::all_of(e.contains.begin(), e.contains.end(),
                                         [&](const std::string& s) {
                                           return prompt.find(s) != std::string::npos;
                                         });
    if (!all_present) continue;
    entry_index = i;
    break;
  }

  MockResponse response;
  {
    std::lock_guard lock(mutex_);
    captured_.push_back({endpoint.name, fp, prompt});
    if (entry_index == script_.entries.size()) {
      throw MockMiss(endpoint.name + ": no mock entry for fingerprint " + fp);
    }
    const MockEntry& entry = script_.entries[entry_index];
    const std::size_t call = call_index_[{entry_index, fp}]++;
    if (call < entry.responses.size()) {
      response = entry.responses[call];
    } else if (entry.on_exhausted.value_or(script_.exhaustion) == ExhaustionPolicy::RepeatLast) {
      response = entry.responses.back();
    } else {
      throw MockMiss(endpoint.name + ": mock entry " + std::to_string(entry_index) +
                     " exhausted after " + std::to_string(entry.responses.size()) + " calls");
    }
  }

  switch (response.kind) {
    case MockResponse::Kind::NetworkFailure:
      throw NetworkError(endpoint.name + ": scripted network failure");
    case MockResponse::Kind::ProtocolFailure:
      throw ProtocolError(endpoint.name + ": scripted protocol failure");
    case MockResponse::Kind::Text:
      break;
  }
  return {response.text, {}};
}

std::vector<CapturedRequest> MockTransport::captured() const {
  std::lock_guard lock(mutex_);
  return captured_;
}

std::size_t MockTransport::call_count(std::string_view endpoint) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(captured_.begin(), captured_.end(),
                    [&](const CapturedRequest& r) { return r.endpoint == endpoint; }));
}

std::size_t MockTransport::total_calls() const {
  std::lock_guard lock(mutex_);
  return captured_.size();
}

}  // namespace tandem
