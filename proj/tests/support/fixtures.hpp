#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tandem/assessment.hpp"
#include "tandem/gateway.hpp"
#include "tandem/trace.hpp"

namespace tandem::testing {

inline Query make_query(std::string id, std::string question = "What is shown?",
                        std::string ground_truth = "A",
                        TaskKind kind = TaskKind::MultipleChoice,
                        Modality modality = Modality::Image) {
  Query q;
  q.id = std::move(id);
  q.modality = modality;
  q.media = {"file://media/" + q.id + (modality == Modality::Video ? ".mp4" : ".png")};
  q.question = std::move(question);
  q.ground_truth = std::move(ground_truth);
  q.task_kind = kind;
  return q;
}

inline ReasoningTrace make_trace(std::string query_id, int steps, std::string answer = "A",
                                 int sample_index = 0) {
  ReasoningTrace t;
  t.query_id = std::move(query_id);
  for (int i = 1; i <= steps; ++i) {
    t.steps.push_back({i, "step " + std::to_string(i), "detail of step " + std::to_string(i),
                       i == steps ? StepAction::Summary : StepAction::Continue});
  }
  t.final_summary = "summary";
  t.final_answer = std::move(answer);
  t.sample_index = sample_index;
  return t;
}

inline std::string step_reply(const std::string& action, const std::string& summary = "look",
                              const std::string& detail = "inspect the image") {
  return Json{{"summary", summary}, {"detail", detail}, {"action", action}}.dump();
}

inline std::string final_reply(const std::string& answer, const std::string& summary = "done") {
  return Json{{"final_summary", summary}, {"final_answer", answer}}.dump();
}

/// A complete trace document with `steps` steps, as a reasoner would send it.
inline std::string trace_reply(int steps, const std::string& answer,
                               const std::string& tag = "reason") {
  Json s = Json::array();
  for (int i = 1; i <= steps; ++i) {
    s.push_back({{"summary", tag + " " + std::to_string(i)},
                 {"detail", "detail " + std::to_string(i)},
                 {"action", i == steps ? "summary" : "continue"}});
  }
  return Json{{"steps", s}, {"final_summary", "summary of " + tag}, {"final_answer", answer}}
      .dump();
}

inline std::string verdict_reply(bool satisfactory, const std::string& feedback,
                                 const std::string& answer = "A") {
  return Json{{"satisfactory", satisfactory}, {"feedback", feedback}, {"answer", answer}}.dump();
}

inline std::string scores_reply(const std::vector<int>& scores) {
  return Json{{"scores", scores}}.dump();
}

/// Mock record matching `endpoint` and every substring in `contains`.
inline Json mock_entry(const std::string& endpoint, std::vector<std::string> contains,
                       std::vector<Json> responses) {
  Json e = {{"endpoint", endpoint}, {"responses", responses}};
  if (!contains.empty()) e["contains"] = contains;
  return e;
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

inline std::shared_ptr<MockTransport> make_mock(const std::vector<Json>& entries,
                                                bool repeat_last = true) {
  std::vector<Json> rows;
  if (repeat_last) rows.push_back({{"exhaustion", "repeat_last"}});
  rows.insert(rows.end(), entries.begin(), entries.end());
  return std::make_shared<MockTransport>(MockScript::from_jsonl_text(to_jsonl(rows)));
}

inline ModelEndpoint endpoint(const std::string& name, EndpointRole role) {
  ModelEndpoint e;
  e.name = name;
  e.role = role;
  e.base_url = "http://127.0.0.1:9/v1";
  e.max_retries = 2;
  return e;
}

/// Gateway options that never actually sleep.
inline GatewayOptions fast_options() {
  GatewayOptions o;
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  static std::mt19937_64 salt(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("tandem_" + name + "_" + std::to_string(salt() % 1000000007ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace tandem::testing
