#include "tandem/tracegen.hpp"

#include <cstdio>

#include "tandem/error.hpp"
#include "tandem/parallel.hpp"
#include "tandem/prompt.hpp"

namespace tandem {

const char* const kDefaultStepPrompt =
    "You are solving a visual reasoning problem one step at a time.\n"
    "Question: {question}\n\n"
    "Reasoning steps so far (JSON array):\n{history}\n\n"
    "Write reasoning step {step_index} (at most {max_steps} steps in total). Reply with a single "
    "JSON object {\"summary\": <one-sentence summary of this step>, \"detail\": <the detailed "
    "reasoning>, \"action\": \"continue\" or \"summary\"}. Use \"continue\" when another step is "
    "needed and \"summary\" when the reasoning is complete.{cap_instruction}";

const char* const kDefaultAnswerPrompt =
    "You solved a visual reasoning problem step by step.\n"
    "Question: {question}\n\n"
    "Complete reasoning (JSON array):\n{history}\n\n"
    "Summarize the reasoning and give the final answer. Reply with a single JSON object "
    "{\"final_summary\": <summary of the reasoning>, \"final_answer\": <the answer only>}.";

namespace {

constexpr const char* kCapInstruction =
    "\nThis is the last allowed step: its \"action\" must be \"summary\".";

std::string format_temperature(double t) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", t);
  return buffer;
}

PromptVars base_vars(const Query& query, const GenerationParams& params) {
  return {{"question", query.question},
          {"query_id", query.id},
          {"modality", std::string(to_string(query.modality))},
          {"temperature", format_temperature(params.temperature)}};
}

FinalAnswer final_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("final answer reply is not a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "final_summary" && key != "final_answer") {
      throw SchemaError("final answer reply: unexpected key '" + key + "'");
    }
  }
  const auto fs = doc.find("final_summary");
  const auto fa = doc.find("final_answer");
  if (fs == doc.end() || fa == doc.end() || !fs->is_string() || !fa->is_string()) {
    throw SchemaError("final answer reply needs string final_summary and final_answer");
  }
  FinalAnswer out{fs->get<std::string>(), fa->get<std::string>()};
  if (out.final_summary.empty()) throw EmptyFieldError("empty final_summary");
  if (out.final_answer.empty()) throw EmptyFieldError("empty final_answer");
  return out;
}

}  // namespace

void GenLoopConfig::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (param_schedule.size() != static_cast<std::size_t>(n_samples)) {
    throw ConfigError("param_schedule length must equal n_samples");
  }
  for (const auto& p : param_schedule) p.validate();
}

std::vector<GenerationParams> GenLoopConfig::temperature_ladder(int n, double lo, double hi,
                                                                const GenerationParams& base) {
  std::vector<GenerationParams> out;
  for (int i = 0; i < n; ++i) {
    GenerationParams p = base;
    p.temperature = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    if (base.seed) p.seed = *base.seed + i;
    out.push_back(p);
  }
  return out;
}

TraceGenerator::TraceGenerator(ModelGateway& gateway, ModelEndpoint generator,
                               GenLoopConfig config)
    : gateway_(gateway), generator_(std::move(generator)), config_(std::move(config)) {
  config_.validate();
}

std::string TraceGenerator::render_history(std::span<const ReasoningStep> steps) const {
  Json history = Json::array();
  for (const auto& s : steps) history.push_back(to_json(s));
  return canonical_dump(history);
}

ReasoningStep TraceGenerator::generate_step(const Query& query,
                                            std::span<const ReasoningStep> history,
                                            StepAction action, const GenerationParams& params,
                                            bool final_allowed) {
  if (action != StepAction::Continue) {
    throw PreconditionError("generate_step requires a continue action; summary routes to "
                            "generate_final");
  }
  const int index = static_cast<int>(history.size()) + 1;
  PromptVars vars = base_vars(query, params);
  vars["history"] = render_history(history);
  vars["step_index"] = std::to_string(index);
  vars["max_steps"] = std::to_string(config_.max_steps);
  vars["cap_instruction"] = final_allowed ? kCapInstruction : "";
  const ChatExchange request =
      make_exchange(render_template(config_.step_prompt_template, vars), query.media, params);

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatExchange reply = gateway_.complete(generator_, request);
    try {
      const Json doc = extract_json_object(*reply.response_text);
      if (doc.is_discarded()) throw SchemaError("reply holds no JSON object");
      return step_from_json(doc, index);
    } catch (const SchemaError& e) {
      last_error = e.what();
    }
  }
  throw StepParseError(query.id + ": step " + std::to_string(index) +
                       " unparsable after retry: " + last_error);
}

FinalAnswer TraceGenerator::generate_final(const Query& query,
                                           std::span<const ReasoningStep> steps,
                                           const GenerationParams& params) {
  if (steps.empty() || steps.back().action != StepAction::Summary) {
    throw PreconditionError("generate_final requires the last step to carry the summary action");
  }
  PromptVars vars = base_vars(query, params);
  vars["history"] = render_history(steps);
  const ChatExchange request =
      make_exchange(render_template(config_.answer_prompt_template, vars), query.media, params);

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const ChatExchange reply = gateway_.complete(generator_, request);
    try {
      return final_from_json(extract_json_object(*reply.response_text));
    } catch (const SchemaError& e) {
      last_error = e.what();
    }
  }
  throw StepParseError(query.id + ": final answer unparsable after retry: " + last_error);
}

ReasoningTrace TraceGenerator::generate_trace(const Query& query, const GenerationParams& params,
                                              int max_steps) {
  if (max_steps < 1) throw PreconditionError("max_steps must be >= 1");
  ReasoningTrace trace;
  trace.query_id = query.id;
  trace.source = TraceSource::Generated;
  for (int t = 1; t <= max_steps; ++t) {
    const bool at_cap = t == max_steps;
    ReasoningStep step = generate_step(query, trace.steps, StepAction::Continue, params, at_cap);
    if (at_cap && step.action == StepAction::Continue) {
      step.action = StepAction::Summary;
      trace.forced_summary = true;
    }
    trace.steps.push_back(std::move(step));
    if (trace.steps.back().action == StepAction::Summary) break;
  }
  FinalAnswer final = generate_final(query, trace.steps, params);
  trace.final_summary = std::move(final.final_summary);
  trace.final_answer = std::move(final.final_answer);
  trace.validate();
  return trace;
}

std::vector<SampleOutcome> TraceGenerator::sample_traces(const Query& query,
                                                         std::size_t parallelism) {
  const auto n = static_cast<std::size_t>(config_.n_samples);
  std::vector<SampleOutcome> outcomes(n);
  parallel_for(n, parallelism, [&](std::size_t i) {
    outcomes[i].sample_index = static_cast<int>(i);
    try {
      ReasoningTrace trace = generate_trace(query, config_.param_schedule[i], config_.max_steps);
      trace.sample_index = static_cast<int>(i);
      outcomes[i].trace = std::move(trace);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  return outcomes;
}

}  // namespace tandem
