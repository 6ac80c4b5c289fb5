#include "tandem/evolve.hpp"

#include "tandem/error.hpp"
#include "tandem/parallel.hpp"
#include "tandem/prompt.hpp"

namespace tandem {

const char* const kDefaultReasonerPrompt =
    "You are the reasoning agent. Solve the question with explicit step-by-step reasoning.\n"
    "Question: {question}\n\n"
    "{revision_block}"
    "Reply with a single JSON object {\"steps\": [{\"summary\": ..., \"detail\": ..., "
    "\"action\": \"continue\" or \"summary\"}, ...], \"final_summary\": ..., \"final_answer\": "
    "...}. Every step except the last uses \"continue\"; the last step uses \"summary\".";

const char* const kDefaultSummarizerPrompt =
    "You are the summary agent. Review the reasoning path below, identify any flaws, and answer "
    "the question.\n"
    "Question: {question}\n\n"
    "Reasoning path:\n{trace}\n"
    "Reply with a single JSON object {\"satisfactory\": true or false, \"feedback\": <corrective "
    "feedback, required when not satisfactory>, \"answer\": <your final answer>}.";

namespace {

constexpr std::pair<TerminalReason, std::string_view> kReasons[] = {
    {TerminalReason::Satisfactory, "satisfactory"},
    {TerminalReason::MaxIterations, "max_iterations"},
    {TerminalReason::Failed, "failed"},
};

std::string revision_block(const ReasoningTrace& prev, const SummaryVerdict& verdict,
                           int iteration) {
  return "Your reasoning from iteration " + std::to_string(iteration - 1) + ":\n" +
         serialize_trace(prev) + "\nReviewer feedback:\n" + verdict.feedback +
         "\n\nRevise your reasoning so that it addresses the feedback.\n\n";
}

}  // namespace

void SummaryVerdict::validate() const {
  if (answer.empty()) throw EmptyFieldError("verdict answer is empty");
  if (!satisfactory && feedback.empty()) {
    throw EmptyFieldError("an unsatisfactory verdict needs feedback");
  }
}

SummaryVerdict parse_verdict(std::string_view reply) {
  const Json doc = extract_json_object(reply);
  if (doc.is_discarded() || !doc.is_object()) throw SchemaError("verdict is not a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "satisfactory" && key != "feedback" && key != "answer") {
      throw SchemaError("verdict: unexpected key '" + key + "'");
    }
  }
  const auto sat = doc.find("satisfactory");
  const auto answer = doc.find("answer");
  const auto feedback = doc.find("feedback");
  if (sat == doc.end() || !sat->is_boolean()) throw SchemaError("verdict needs boolean satisfactory");
  if (answer == doc.end() || !answer->is_string()) throw SchemaError("verdict needs string answer");
  if (feedback != doc.end() && !feedback->is_string()) {
    throw SchemaError("verdict feedback must be a string");
  }
  SummaryVerdict v{sat->get<bool>(), feedback == doc.end() ? "" : feedback->get<std::string>(),
                   answer->get<std::string>()};
  v.validate();
  return v;
}

Json to_json(const SummaryVerdict& v) {
  return {{"satisfactory", v.satisfactory}, {"feedback", v.feedback}, {"answer", v.answer}};
}

std::string_view to_string(TerminalReason r) {
  for (const auto& [value, name] : kReasons) {
    if (value == r) return name;
  }
  return "unknown";
}

Json to_json(const EvolveSession& s) {
  Json iterations = Json::array();
  for (std::size_t i = 0; i < s.iterations.size(); ++i) {
    iterations.push_back({{"iteration", i + 1},
                          {"trace", to_json(s.iterations[i].trace)},
                          {"verdict", to_json(s.iterations[i].verdict)}});
  }
  Json doc = {{"query_id", s.query_id},
              {"iterations", std::move(iterations)},
              {"terminal_reason", to_string(s.terminal_reason)},
              {"harvested", s.harvested}};
  if (s.failure) doc["failure"] = *s.failure;
  return doc;
}

EvolveSession session_from_json(const Json& doc) {
  EvolveSession s;
  try {
    s.query_id = doc.at("query_id").get<std::string>();
    for (const auto& it : doc.at("iterations")) {
      SummaryVerdict v{it.at("verdict").at("satisfactory").get<bool>(),
                       it.at("verdict").at("feedback").get<std::string>(),
                       it.at("verdict").at("answer").get<std::string>()};
      v.validate();
      s.iterations.push_back({trace_from_json(it.at("trace")), std::move(v)});
    }
    const auto reason = doc.at("terminal_reason").get<std::string>();
    bool known = false;
    for (const auto& [value, name] : kReasons) {
      if (name == reason) {
        s.terminal_reason = value;
        known = true;
      }
    }
    if (!known) throw SchemaError("session: unknown terminal_reason '" + reason + "'");
    s.harvested = doc.at("harvested").get<bool>();
    if (doc.contains("failure")) s.failure = doc["failure"].get<std::string>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("session: ") + e.what());
  }
  if (s.terminal_reason == TerminalReason::Satisfactory &&
      (s.iterations.empty() || !s.iterations.back().verdict.satisfactory)) {
    throw SchemaError(s.query_id + ": satisfactory session must end on a satisfactory verdict");
  }
  return s;
}

void EvolveConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("evolve max_iterations must be >= 1");
  if (harvest_threshold < 1 || harvest_threshold > 100) {
    throw ConfigError("harvest threshold must lie in 1..100");
  }
  reasoner_params.validate();
  summarizer_params.validate();
}

Evolver::Evolver(ModelGateway& gateway, ModelEndpoint reasoner, ModelEndpoint summarizer,
                 EvolveConfig config)
    : gateway_(gateway),
      reasoner_(std::move(reasoner)),
      summarizer_(std::move(summarizer)),
      config_(std::move(config)) {
  config_.validate();
}

EvolveIteration Evolver::run_iteration(const Query& query, const ReasoningTrace* prev_trace,
                                       const SummaryVerdict* prev_verdict, int iteration) {
  if ((prev_trace == nullptr) != (prev_verdict == nullptr)) {
    throw PreconditionError("previous trace and verdict must be given together");
  }
  if (iteration < 1 || (iteration == 1) != (prev_trace == nullptr)) {
    throw PreconditionError("iteration 1 takes no history; later iterations require it");
  }
  const PromptVars reasoner_vars = {
      {"question", query.question},
      {"query_id", query.id},
      {"iteration", std::to_string(iteration)},
      {"previous_trace", prev_trace ? serialize_trace(*prev_trace) : ""},
      {"feedback", prev_verdict ? prev_verdict->feedback : ""},
      {"revision_block", prev_trace ? revision_block(*prev_trace, *prev_verdict, iteration) : ""}};
  const ChatExchange reasoner_request = make_exchange(
      render_template(config_.reasoner_prompt, reasoner_vars), query.media, config_.reasoner_params);

  EvolveIteration out;
  std::string last_error;
  bool parsed = false;
  for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
    const ChatExchange reply = gateway_.complete(reasoner_, reasoner_request);
    try {
      const Json doc = extract_json_object(*reply.response_text);
      if (doc.is_discarded()) throw SchemaError("reply holds no JSON object");
      out.trace = trace_from_json(doc);
      parsed = true;
    } catch (const SchemaError& e) {
      last_error = e.what();
    }
  }
  if (!parsed) {
    throw StepParseError(query.id + ": reasoner trace unparsable after retry: " + last_error);
  }
  out.trace.query_id = query.id;
  out.trace.source = iteration == 1 ? TraceSource::AgentReasoner : TraceSource::EvolveRefined;
  out.trace.sample_index = iteration - 1;

  const PromptVars summarizer_vars = {{"question", query.question},
                                      {"query_id", query.id},
                                      {"iteration", std::to_string(iteration)},
                                      {"trace", serialize_trace(out.trace)}};
  const ChatExchange summarizer_request =
      make_exchange(render_template(config_.summarizer_prompt, summarizer_vars), query.media,
                    config_.summarizer_params);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatExchange reply = gateway_.complete(summarizer_, summarizer_request);
    try {
      out.verdict = parse_verdict(*reply.response_text);
      return out;
    } catch (const SchemaError& e) {
      last_error = e.what();
    }
  }
  throw VerdictParseError(query.id + ": summarizer verdict unparsable after retry: " + last_error);
}

EvolveSession Evolver::run_session(const Query& query) {
  EvolveSession session;
  session.query_id = query.id;
  try {
    for (int n = 1; n <= config_.max_iterations; ++n) {
      const EvolveIteration* prev = session.last();
      session.iterations.push_back(run_iteration(query, prev ? &prev->trace : nullptr,
                                                 prev ? &prev->verdict : nullptr, n));
      if (session.iterations.back().verdict.satisfactory) {
        session.terminal_reason = TerminalReason::Satisfactory;
        return session;
      }
    }
    session.terminal_reason = TerminalReason::MaxIterations;
  } catch (const std::exception& e) {
    session.terminal_reason = TerminalReason::Failed;
    session.failure = e.what();
  }
  return session;
}

Json to_json(const HarvestedTrace& r) {
  return {{"query", to_json(r.query)}, {"trace", to_json(r.trace)}, {"path_score", r.path_score}};
}

Json to_json(const EnrichmentRecord& r) {
  Json doc = {{"query", to_json(r.query)},
              {"iteration", r.iteration},
              {"trace", to_json(r.trace)},
              {"verdict", to_json(r.verdict)},
              {"answer_correct", r.answer_correct}};
  if (r.path_score) doc["path_score"] = *r.path_score;
  if (r.quality_level) doc["quality_level"] = *r.quality_level;
  return doc;
}

HarvestResult harvest(std::span<EvolveSession> sessions,
                      const std::map<std::string, Query, std::less<>>& queries, Assessor& assessor,
                      int threshold, std::size_t parallelism) {
  struct PerSession {
    std::optional<HarvestedTrace> sft;
    std::vector<EnrichmentRecord> enrichment;
  };
  std::vector<PerSession> parts(sessions.size());

  parallel_for(sessions.size(), parallelism, [&](std::size_t s) {
    EvolveSession& session = sessions[s];
    session.harvested = false;
    if (session.iterations.empty()) return;
    const auto q = queries.find(session.query_id);
    if (q == queries.end()) throw DataError("session for unknown query " + session.query_id);
    const Query& query = q->second;

    std::vector<ReasoningTrace> traces;
    for (const auto& it : session.iterations) traces.push_back(it.trace);
    const std::vector<AssessmentResult> results = assessor.assess_group(query, traces);

    for (std::size_t i = 0; i < traces.size(); ++i) {
      parts[s].enrichment.push_back({query, static_cast<int>(i) + 1, traces[i],
                                     session.iterations[i].verdict, results[i].answer_correct,
                                     results[i].path_score, results[i].quality_level});
    }
    const AssessmentResult& final_result = results.back();
    if (session.terminal_reason != TerminalReason::Failed && final_result.answer_correct &&
        final_result.path_score && *final_result.path_score >= threshold) {
      parts[s].sft = HarvestedTrace{query, traces.back(), *final_result.path_score};
      session.harvested = true;
    }
  });

  HarvestResult out;
  for (auto& p : parts) {
    if (p.sft) out.reasoner_sft.push_back(std::move(*p.sft));
    for (auto& e : p.enrichment) out.summary_enrichment.push_back(std::move(e));
  }
  return out;
}

std::vector<CycleManifest> evolve_cycle_plan(int cycles, const std::string& reasoner_tag,
                                             const std::string& summarizer_tag) {
  if (cycles < 1) throw ConfigError("evolve needs at least one cycle");
  std::vector<CycleManifest> plan;
  for (int k = 1; k <= cycles; ++k) {
    const std::string now = std::to_string(k);
    const std::string next = std::to_string(k + 1);
    plan.push_back({k,
                    reasoner_tag + "_" + now,
                    summarizer_tag + "_" + now,
                    reasoner_tag + "_" + next,
                    summarizer_tag + "_" + next,
                    "sessions_cycle_" + now + ".jsonl",
                    "reasoner_sft_cycle_" + now + ".jsonl",
                    "summary_enrichment_cycle_" + now + ".jsonl",
                    "external retrain: " + reasoner_tag + "_" + now + " -> " + reasoner_tag + "_" +
                        next + ", " + summarizer_tag + "_" + now + " -> " + summarizer_tag + "_" +
                        next});
  }
  return plan;
}

bool cycle_plan_is_chained(std::span<const CycleManifest> plan) {
  for (std::size_t i = 1; i < plan.size(); ++i) {
    if (plan[i].cycle <= plan[i - 1].cycle) return false;
    if (plan[i].reasoner_in != plan[i - 1].reasoner_out) return false;
    if (plan[i].summarizer_in != plan[i - 1].summarizer_out) return false;
  }
  return true;
}

Json to_json(std::span<const CycleManifest> plan) {
  Json cycles = Json::array();
  for (const auto& c : plan) {
    cycles.push_back({{"cycle", c.cycle},
                      {"reasoner_in", c.reasoner_in},
                      {"summarizer_in", c.summarizer_in},
                      {"reasoner_out", c.reasoner_out},
                      {"summarizer_out", c.summarizer_out},
                      {"sessions_file", c.sessions_file},
                      {"reasoner_sft_file", c.reasoner_sft_file},
                      {"summary_enrichment_file", c.summary_enrichment_file},
                      {"retrain_hook", c.retrain_hook}});
  }
  return {{"cycles", std::move(cycles)}};
}

std::vector<CycleManifest> cycle_plan_from_json(const Json& doc) {
  std::vector<CycleManifest> plan;
  try {
    for (const auto& c : doc.at("cycles")) {
      plan.push_back({c.at("cycle").get<int>(), c.at("reasoner_in").get<std::string>(),
                      c.at("summarizer_in").get<std::string>(),
                      c.at("reasoner_out").get<std::string>(),
                      c.at("summarizer_out").get<std::string>(),
                      c.at("sessions_file").get<std::string>(),
                      c.at("reasoner_sft_file").get<std::string>(),
                      c.at("summary_enrichment_file").get<std::string>(),
                      c.at("retrain_hook").get<std::string>()});
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("cycle plan: ") + e.what());
  }
  return plan;
}

}  // namespace tandem
