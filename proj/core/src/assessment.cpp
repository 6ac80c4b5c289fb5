#include "tandem/assessment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tandem/error.hpp"
#include "tandem/prompt.hpp"

namespace tandem {

const char* const kDefaultJudgePrompt =
    "Decide whether a generated answer matches the reference answer.\n"
    "Question: {question}\n"
    "Generated answer: {final_answer}\n"
    "Reference answer: {ground_truth}\n"
    "Reply with exactly one word: yes or no.";

const char* const kDefaultScorerPrompt =
    "You are grading {count} reasoning paths written for the same question. Judge each path on "
    "the step-by-step accuracy of its reasoning and on its level of detail.\n"
    "Question: {question}\n"
    "Reference answer: {ground_truth}\n"
    "{exemplars}"
    "Reasoning paths:\n{paths}\n"
    "Give every path an integer score from 1 to 100. Reply with a single JSON object "
    "{\"scores\": [...]} listing exactly {count} scores in path order.";

const char* const kDefaultFlawPrompt =
    "Review the reasoning path below and describe its flaws precisely: wrong observations, "
    "invalid inferences, skipped steps. Reply with an empty message if it has none.\n"
    "Question: {question}\n"
    "Reference answer: {ground_truth}\n"
    "Reasoning path:\n{trace}";

namespace {

constexpr std::pair<ExemplarCategory, std::string_view> kCategories[] = {
    {ExemplarCategory::GeneralUnderstanding, "general_understanding"},
    {ExemplarCategory::TemporalGrounding, "temporal_grounding"},
    {ExemplarCategory::CausalReasoning, "causal_reasoning"},
    {ExemplarCategory::FineGrainedAnalysis, "fine_grained_analysis"},
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string render_paths(std::span<const ReasoningTrace> traces) {
  std::string out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    out += "Path " + std::to_string(i + 1) + ":\n" + serialize_trace(traces[i]);
  }
  return out;
}

std::string render_exemplars(const std::vector<const GoldenExemplar*>& exemplars) {
  if (exemplars.empty()) return {};
  std::string out = "Reference examples of strong video reasoning:\n";
  for (const GoldenExemplar* e : exemplars) {
    out += "Example (" + std::string(to_string(e->category)) + "): " + e->query_summary + "\n";
    out += serialize_trace(e->exemplar_trace);
  }
  return out;
}

}  // namespace

std::string_view to_string(ExemplarCategory c) {
  for (const auto& [value, name] : kCategories) {
    if (value == c) return name;
  }
  return "unknown";
}

std::optional<ExemplarCategory> exemplar_category_from_string(std::string_view text) {
  for (const auto& [value, name] : kCategories) {
    if (name == text) return value;
  }
  return std::nullopt;
}

int quality_level(int path_score) {
  if (path_score < 1 || path_score > 100) {
    throw RangeError("path score " + std::to_string(path_score) + " outside 1..100");
  }
  return (path_score + 19) / 20;
}

Json to_json(const AssessmentResult& r) {
  Json doc = {{"query_id", r.query_id},
              {"sample_index", r.sample_index},
              {"answer_correct", r.answer_correct}};
  if (r.path_score) doc["path_score"] = *r.path_score;
  if (r.quality_level) doc["quality_level"] = *r.quality_level;
  if (r.flaws) doc["flaws"] = *r.flaws;
  if (r.error) doc["error"] = *r.error;
  return doc;
}

AssessmentResult assessment_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("assessment must be a JSON object");
  AssessmentResult r;
  try {
    r.query_id = doc.at("query_id").get<std::string>();
    r.sample_index = doc.at("sample_index").get<int>();
    r.answer_correct = doc.at("answer_correct").get<bool>();
    if (doc.contains("path_score")) r.path_score = doc["path_score"].get<int>();
    if (doc.contains("quality_level")) r.quality_level = doc["quality_level"].get<int>();
    if (doc.contains("flaws")) r.flaws = doc["flaws"].get<std::string>();
    if (doc.contains("error")) r.error = doc["error"].get<std::string>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("assessment: ") + e.what());
  }
  if (r.path_score) {
    if (!r.answer_correct) throw SchemaError("assessment: filtered trace carries a path_score");
    if (quality_level(*r.path_score) != r.quality_level.value_or(0)) {
      throw SchemaError("assessment: quality_level does not match path_score");
    }
  }
  return r;
}

GoldenExemplar exemplar_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("exemplar must be a JSON object");
  GoldenExemplar e;
  try {
    const auto category = doc.at("category").get<std::string>();
    auto parsed = exemplar_category_from_string(category);
    if (!parsed) throw SchemaError("exemplar: unknown category '" + category + "'");
    e.category = *parsed;
    e.query_summary = doc.at("query_summary").get<std::string>();
    e.exemplar_trace = trace_from_json(doc.at("exemplar_trace"));
    e.provenance = doc.value("provenance", std::string());
  } catch (const Json::exception& ex) {
    throw SchemaError(std::string("exemplar: ") + ex.what());
  }
  return e;
}

Json to_json(const GoldenExemplar& e) {
  return {{"category", to_string(e.category)},
          {"query_summary", e.query_summary},
          {"exemplar_trace", to_json(e.exemplar_trace)},
          {"provenance", e.provenance}};
}

std::vector<const GoldenExemplar*> select_exemplars(const Query& query,
                                                    std::span<const GoldenExemplar> bank) {
  std::vector<const GoldenExemplar*> picked;
  if (query.category) {
    if (auto wanted = exemplar_category_from_string(*query.category)) {
      for (const auto& e : bank) {
        if (e.category == *wanted) picked.push_back(&e);
      }
    }
  }
  if (!picked.empty()) return picked;
  for (const auto& [category, name] : kCategories) {
    auto it = std::find_if(bank.begin(), bank.end(),
                           [&](const GoldenExemplar& e) { return e.category == category; });
    if (it != bank.end()) picked.push_back(&*it);
  }
  return picked;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  std::string token = trim(reply);
  while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) {
    token.pop_back();
  }
  for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (token == "yes") return true;
  if (token == "no") return false;
  return std::nullopt;
}

std::optional<std::vector<int>> parse_scores(std::string_view reply, std::size_t expected) {
  const Json doc = extract_json_object(reply);
  if (doc.is_discarded()) return std::nullopt;
  const auto it = doc.find("scores");
  if (it == doc.end() || !it->is_array() || it->size() != expected) return std::nullopt;
  std::vector<int> scores;
  for (const auto& v : *it) {
    if (!v.is_number()) return std::nullopt;
    const double x = v.get<double>();
    if (x != std::floor(x) || x < 1 || x > 100) return std::nullopt;
    scores.push_back(static_cast<int>(x));
  }
  return scores;
}

Assessor::Assessor(ModelGateway& gateway, ModelEndpoint judge, ModelEndpoint scorer,
                   std::optional<ModelEndpoint> flaw_annotator, AssessmentConfig config,
                   std::vector<GoldenExemplar> exemplar_bank)
    : gateway_(gateway),
      judge_(std::move(judge)),
      scorer_(std::move(scorer)),
      flaw_annotator_(std::move(flaw_annotator)),
      config_(std::move(config)),
      bank_(std::move(exemplar_bank)) {
  if (config_.annotate_flaws && !flaw_annotator_) {
    throw ConfigError("flaw annotation enabled without a flaw annotator endpoint");
  }
}

void Assessor::require_exemplars(const Query& query) const {
  if (query.modality == Modality::Video && select_exemplars(query, bank_).empty()) {
    throw ConfigError(query.id + ": video scoring requires a golden exemplar bank");
  }
}

bool Assessor::filter_answer(const Query& query, const ReasoningTrace& trace) {
  if (!trace.query_id.empty() && trace.query_id != query.id) {
    throw PreconditionError("trace " + trace.query_id + " does not belong to query " + query.id);
  }
  const PromptVars vars = {{"question", query.question},
                           {"final_answer", trace.final_answer},
                           {"ground_truth", query.ground_truth},
                           {"query_id", query.id}};
  const ChatExchange request =
      make_exchange(render_template(config_.judge_prompt, vars), {}, config_.judge_params);
  std::string last_reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatExchange reply = gateway_.complete(judge_, request);
    if (auto verdict = parse_yes_no(*reply.response_text)) return *verdict;
    last_reply = *reply.response_text;
  }
  throw VerdictParseError(query.id + ": judge reply is neither yes nor no: '" +
                          last_reply.substr(0, 80) + "'");
}

std::vector<int> Assessor::score_paths(const Query& query,
                                       std::span<const ReasoningTrace> traces) {
  if (traces.empty()) throw PreconditionError("score_paths needs at least one trace");
  for (const auto& t : traces) {
    if (!t.query_id.empty() && t.query_id != query.id) {
      throw PreconditionError("score_paths: traces must all belong to query " + query.id);
    }
  }
  std::vector<const GoldenExemplar*> exemplars;
  if (query.modality == Modality::Video) {
    require_exemplars(query);
    exemplars = select_exemplars(query, bank_);
  }
  const PromptVars vars = {{"question", query.question},
                           {"ground_truth", query.ground_truth},
                           {"query_id", query.id},
                           {"count", std::to_string(traces.size())},
                           {"paths", render_paths(traces)},
                           {"exemplars", render_exemplars(exemplars)}};
  const ChatExchange request =
      make_exchange(render_template(config_.scorer_prompt, vars), query.media, config_.scorer_params);
  std::string last_reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatExchange reply = gateway_.complete(scorer_, request);
    if (auto scores = parse_scores(*reply.response_text, traces.size())) return *scores;
    last_reply = *reply.response_text;
  }
  throw ScoreParseError(query.id + ": scorer reply lacks " + std::to_string(traces.size()) +
                        " scores in 1..100: '" + last_reply.substr(0, 120) + "'");
}

std::string Assessor::annotate_flaws(const Query& query, const ReasoningTrace& trace) {
  if (!flaw_annotator_) throw ConfigError("no flaw annotator endpoint configured");
  trace.validate();
  const PromptVars vars = {{"question", query.question},
                           {"ground_truth", query.ground_truth},
                           {"query_id", query.id},
                           {"trace", serialize_trace(trace)}};
  const ChatExchange request =
      make_exchange(render_template(config_.flaw_prompt, vars), query.media, config_.flaw_params);
  return trim(*gateway_.complete(*flaw_annotator_, request).response_text);
}

std::vector<AssessmentResult> Assessor::assess_group(const Query& query,
                                                     std::span<const ReasoningTrace> traces) {
  require_exemplars(query);

  std::vector<AssessmentResult> results(traces.size());
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    AssessmentResult& r = results[i];
    r.query_id = query.id;
    r.sample_index = traces[i].sample_index;
    try {
      r.answer_correct = filter_answer(query, traces[i]);
      if (r.answer_correct) survivors.push_back(i);
    } catch (const std::exception& e) {
      r.error = std::string("answer filter: ") + e.what();
    }
  }

  if (!survivors.empty()) {
    std::vector<ReasoningTrace> batch;
    for (std::size_t i : survivors) batch.push_back(traces[i]);
    try {
      const std::vector<int> scores = score_paths(query, batch);
      for (std::size_t k = 0; k < survivors.size(); ++k) {
        results[survivors[k]].path_score = scores[k];
        results[survivors[k]].quality_level = quality_level(scores[k]);
      }
    } catch (const std::exception& e) {
      for (std::size_t i : survivors) results[i].error = std::string("path scoring: ") + e.what();
    }
  }

  if (config_.annotate_flaws) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (results[i].error) continue;
      try {
        results[i].flaws = annotate_flaws(query, traces[i]);
      } catch (const std::exception& e) {
        results[i].error = std::string("flaw annotation: ") + e.what();
      }
    }
  }
  return results;
}

}  // namespace tandem
