#include "tandem/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tandem/error.hpp"

namespace tandem {
namespace {

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> value_of(std::string_view text, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (name == text) return v;
  }
  return std::nullopt;
}

constexpr std::pair<Modality, std::string_view> kModalities[] = {
    {Modality::Image, "image"}, {Modality::Video, "video"}};
constexpr std::pair<TaskKind, std::string_view> kTaskKinds[] = {
    {TaskKind::MultipleChoice, "multiple_choice"},
    {TaskKind::FreeForm, "free_form"},
    {TaskKind::TemporalGrounding, "temporal_grounding"},
    {TaskKind::Jigsaw, "jigsaw"}};
constexpr std::pair<StepAction, std::string_view> kActions[] = {
    {StepAction::Continue, "continue"}, {StepAction::Summary, "summary"}};
constexpr std::pair<TraceSource, std::string_view> kSources[] = {
    {TraceSource::Generated, "generated"},
    {TraceSource::AgentReasoner, "agent_reasoner"},
    {TraceSource::EvolveRefined, "evolve_refined"}};
constexpr std::pair<CorpusViolation, std::string_view> kViolations[] = {
    {CorpusViolation::DuplicateId, "duplicate_id"},
    {CorpusViolation::EmptyField, "empty_field"},
    {CorpusViolation::BadInterval, "bad_interval"},
    {CorpusViolation::BadPermutation, "bad_permutation"}};

const Json& require(const Json& doc, std::string_view key, Json::value_t type,
                    std::string_view what) {
  const auto it = doc.find(key);
  if (it == doc.end()) {
    throw SchemaError(std::string(what) + ": missing required key '" + std::string(key) + "'");
  }
  const bool type_ok = type == Json::value_t::number_integer
                           ? it->is_number_integer()
                           : it->type() == type;
  if (!type_ok) {
    throw SchemaError(std::string(what) + ": key '" + std::string(key) + "' has wrong type");
  }
  return *it;
}

void reject_unknown_keys(const Json& doc, std::initializer_list<std::string_view> allowed,
                         std::string_view what) {
  for (const auto& [key, value] : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(std::string(what) + ": unexpected key '" + key + "'");
    }
  }
}

Json parse_array_text(std::string_view text) {
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) return Json(Json::value_t::discarded);
  return doc;
}

}  // namespace

std::string_view to_string(Modality m) { return name_of(m, kModalities); }
std::string_view to_string(TaskKind k) { return name_of(k, kTaskKinds); }
std::string_view to_string(StepAction a) { return name_of(a, kActions); }
std::string_view to_string(TraceSource s) { return name_of(s, kSources); }
std::string_view to_string(CorpusViolation v) { return name_of(v, kViolations); }

Modality modality_from_string(std::string_view text) {
  if (auto v = value_of(text, kModalities)) return *v;
  throw SchemaError("unknown modality '" + std::string(text) + "'");
}

TaskKind task_kind_from_string(std::string_view text) {
  if (auto v = value_of(text, kTaskKinds)) return *v;
  throw SchemaError("unknown task_kind '" + std::string(text) + "'");
}

Interval parse_interval(std::string_view text) {
  const Json doc = parse_array_text(text);
  if (doc.is_discarded() || doc.size() != 2 || !doc[0].is_number() || !doc[1].is_number()) {
    throw InvalidInterval("interval must be [start, end]: " + std::string(text));
  }
  Interval out{doc[0].get<double>(), doc[1].get<double>()};
  if (!std::isfinite(out.start) || !std::isfinite(out.end) || out.start > out.end) {
    throw InvalidInterval("interval needs finite start <= end: " + std::string(text));
  }
  return out;
}

std::vector<int> parse_permutation(std::string_view text) {
  const Json doc = parse_array_text(text);
  if (doc.is_discarded() || doc.size() < 2) {
    throw NotAPermutation("permutation must be an array of at least 2 entries: " +
                          std::string(text));
  }
  std::vector<int> order;
  std::vector<bool> seen(doc.size() + 1, false);
  for (const auto& v : doc) {
    if (!v.is_number_integer()) throw NotAPermutation("non-integer entry in " + std::string(text));
    const auto p = v.get<std::int64_t>();
    if (p < 1 || p > static_cast<std::int64_t>(doc.size()) || seen[p]) {
      throw NotAPermutation("not a permutation of 1.." + std::to_string(doc.size()) + ": " +
                            std::string(text));
    }
    seen[p] = true;
    order.push_back(static_cast<int>(p));
  }
  return order;
}

Query query_from_json(const Json& doc) {
  constexpr std::string_view what = "query";
  if (!doc.is_object()) throw SchemaError("query must be a JSON object");
  reject_unknown_keys(doc,
                      {"id", "modality", "media", "question", "ground_truth", "task_kind", "category"},
                      what);
  Query q;
  q.id = require(doc, "id", Json::value_t::string, what).get<std::string>();
  q.modality = modality_from_string(
      require(doc, "modality", Json::value_t::string, what).get<std::string>());
  for (const auto& uri : require(doc, "media", Json::value_t::array, what)) {
    if (!uri.is_string()) throw SchemaError("query: media entries must be strings");
    q.media.push_back(uri.get<std::string>());
  }
  q.question = require(doc, "question", Json::value_t::string, what).get<std::string>();
  q.ground_truth = require(doc, "ground_truth", Json::value_t::string, what).get<std::string>();
  q.task_kind = task_kind_from_string(
      require(doc, "task_kind", Json::value_t::string, what).get<std::string>());
  if (auto it = doc.find("category"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("query: category must be a string");
    q.category = it->get<std::string>();
  }
  return q;
}

Json to_json(const Query& q) {
  Json doc = {{"id", q.id},
              {"modality", to_string(q.modality)},
              {"media", q.media},
              {"question", q.question},
              {"ground_truth", q.ground_truth},
              {"task_kind", to_string(q.task_kind)}};
  if (q.category) doc["category"] = *q.category;
  return doc;
}

ReasoningStep step_from_json(const Json& doc, int index) {
  const std::string what = "step " + std::to_string(index);
  if (!doc.is_object()) throw SchemaError(what + " must be an object");
  reject_unknown_keys(doc, {"summary", "detail", "action"}, what);
  ReasoningStep step;
  step.index = index;
  step.brief_summary = require(doc, "summary", Json::value_t::string, what).get<std::string>();
  step.detail = require(doc, "detail", Json::value_t::string, what).get<std::string>();
  const auto action = require(doc, "action", Json::value_t::string, what).get<std::string>();
  if (auto a = value_of(std::string_view(action), kActions)) {
    step.action = *a;
  } else {
    throw SchemaError(what + ": unknown action '" + action + "'");
  }
  if (step.brief_summary.empty()) throw EmptyFieldError(what + ": empty summary");
  if (step.detail.empty()) throw EmptyFieldError(what + ": empty detail");
  return step;
}

Json to_json(const ReasoningStep& step) {
  return {{"summary", step.brief_summary}, {"detail", step.detail}, {"action", to_string(step.action)}};
}

void ReasoningTrace::validate() const {
  if (steps.empty()) throw ActionSequenceError("trace has no steps (no terminal summary)");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const ReasoningStep& s = steps[i];
    if (s.index != static_cast<int>(i) + 1) {
      throw SchemaError("step indices must be contiguous from 1");
    }
    if (s.brief_summary.empty() || s.detail.empty()) {
      throw EmptyFieldError("step " + std::to_string(s.index) + " has an empty field");
    }
    const bool last = i + 1 == steps.size();
    if (!last && s.action == StepAction::Summary) {
      throw ActionSequenceError("step " + std::to_string(s.index) +
                                " has action summary but is not the last step");
    }
    if (last && s.action != StepAction::Summary) {
      throw ActionSequenceError("last step must have action summary");
    }
  }
  if (final_summary.empty()) throw EmptyFieldError("final_summary is empty");
  if (final_answer.empty()) throw EmptyFieldError("final_answer is empty");
  if (sample_index < 0) throw SchemaError("sample_index must be >= 0");
}

ReasoningTrace trace_from_json(const Json& doc) {
  constexpr std::string_view what = "trace";
  if (!doc.is_object()) throw SchemaError("trace must be a JSON object");
  reject_unknown_keys(doc,
                      {"schema", "steps", "final_summary", "final_answer", "query_id", "source",
                       "sample_index", "forced_summary"},
                      what);
  if (auto it = doc.find("schema"); it != doc.end()) {
    if (!it->is_string() || it->get<std::string>() != kTraceSchemaVersion) {
      throw SchemaError("trace: unsupported schema version");
    }
  }
  ReasoningTrace t;
  const Json& steps = require(doc, "steps", Json::value_t::array, what);
  t.final_summary = require(doc, "final_summary", Json::value_t::string, what).get<std::string>();
  t.final_answer = require(doc, "final_answer", Json::value_t::string, what).get<std::string>();
  int index = 0;
  for (const auto& s : steps) t.steps.push_back(step_from_json(s, ++index));
  if (doc.contains("query_id")) {
    t.query_id = require(doc, "query_id", Json::value_t::string, what).get<std::string>();
  }
  if (doc.contains("source")) {
    const auto source = require(doc, "source", Json::value_t::string, what).get<std::string>();
    if (auto s = value_of(std::string_view(source), kSources)) {
      t.source = *s;
    } else {
      throw SchemaError("trace: unknown source '" + source + "'");
    }
  }
  if (doc.contains("sample_index")) {
    const Json& v = doc["sample_index"];
    if (!v.is_number_integer()) throw SchemaError("trace: sample_index must be an integer");
    t.sample_index = v.get<int>();
  }
  if (doc.contains("forced_summary")) {
    t.forced_summary =
        require(doc, "forced_summary", Json::value_t::boolean, what).get<bool>();
  }
  t.validate();
  return t;
}

ReasoningTrace parse_trace(std::string_view json_text) {
  Json doc = Json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw SchemaError("trace is not valid JSON");
  return trace_from_json(doc);
}

Json to_json(const ReasoningTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  return {{"schema", kTraceSchemaVersion},
          {"query_id", t.query_id},
          {"source", to_string(t.source)},
          {"sample_index", t.sample_index},
          {"forced_summary", t.forced_summary},
          {"steps", std::move(steps)},
          {"final_summary", t.final_summary},
          {"final_answer", t.final_answer}};
}

std::string serialize_trace(const ReasoningTrace& trace) {
  return canonical_dump(to_json(trace)) + "\n";
}

std::size_t CorpusReport::count(CorpusViolation kind) const {
  return static_cast<std::size_t>(std::count_if(
      issues.begin(), issues.end(), [&](const CorpusIssue& i) { return i.kind == kind; }));
}

CorpusReport validate_corpus(std::span<const Query> queries) {
  CorpusReport report;
  std::set<std::string, std::less<>> seen;
  for (const Query& q : queries) {
    if (!seen.insert(q.id).second) {
      report.issues.push_back({q.id, CorpusViolation::DuplicateId, "duplicate id '" + q.id + "'"});
    }
    auto empty = [&](std::string_view field) {
      report.issues.push_back({q.id, CorpusViolation::EmptyField, "empty " + std::string(field)});
    };
    if (q.id.empty()) empty("id");
    if (q.media.empty() ||
        std::any_of(q.media.begin(), q.media.end(), [](const auto& m) { return m.empty(); })) {
      empty("media");
    }
    if (q.question.empty()) empty("question");
    if (q.ground_truth.empty()) {
      empty("ground_truth");
      continue;
    }
    try {
      if (q.task_kind == TaskKind::TemporalGrounding) parse_interval(q.ground_truth);
    } catch (const InvalidInterval& e) {
      report.issues.push_back({q.id, CorpusViolation::BadInterval, e.what()});
    }
    try {
      if (q.task_kind == TaskKind::Jigsaw) parse_permutation(q.ground_truth);
    } catch (const NotAPermutation& e) {
      report.issues.push_back({q.id, CorpusViolation::BadPermutation, e.what()});
    }
  }
  return report;
}

}  // namespace tandem
