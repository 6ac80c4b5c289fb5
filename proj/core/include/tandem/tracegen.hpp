#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tandem/gateway.hpp"
#include "tandem/trace.hpp"

namespace tandem {

/// Default prompt for one reasoning step. Placeholders: {question},
/// {query_id}, {modality}, {history}, {step_index}, {max_steps},
/// {temperature}, {cap_instruction}.
extern const char* const kDefaultStepPrompt;
/// Default prompt for the final answer. Placeholders: {question},
/// {query_id}, {modality}, {history}, {temperature}.
extern const char* const kDefaultAnswerPrompt;

struct GenLoopConfig {
  int max_steps = 10;
  int n_samples = 8;
  std::vector<GenerationParams> param_schedule;  // one entry per sample
  std::string step_prompt_template = kDefaultStepPrompt;
  std::string answer_prompt_template = kDefaultAnswerPrompt;

  void validate() const;  // ConfigError

  /// n evenly spaced temperatures from lo to hi (lo alone when n == 1); other
  /// fields copied from `base`. Sample i gets seed base.seed + i when set.
  static std::vector<GenerationParams> temperature_ladder(int n, double lo, double hi,
                                                          const GenerationParams& base);
};

struct FinalAnswer {
  std::string final_summary;
  std::string final_answer;
};

struct SampleOutcome {
  int sample_index = 0;
  std::optional<ReasoningTrace> trace;
  std::string error;  // set iff trace is empty

  bool ok() const { return trace.has_value(); }
};

/// Drives the progressive step recurrence against a generator endpoint.
class TraceGenerator {
 public:
  TraceGenerator(ModelGateway& gateway, ModelEndpoint generator, GenLoopConfig config);

  /// Produces step history.size()+1. `action` is the action chosen by the
  /// previous step and must be Continue. A malformed reply is retried once.
  /// `final_allowed` renders the cap instruction into the prompt.
  ReasoningStep generate_step(const Query& query, std::span<const ReasoningStep> history,
                              StepAction action, const GenerationParams& params,
                              bool final_allowed = false);

  /// Requires the last step to carry the Summary action.
  FinalAnswer generate_final(const Query& query, std::span<const ReasoningStep> steps,
                             const GenerationParams& params);

  /// Steps until a Summary action or max_steps, then the final answer.
  ReasoningTrace generate_trace(const Query& query, const GenerationParams& params,
                                int max_steps);

  /// config.n_samples independent traces using param_schedule[i]; failures
  /// are captured per sample.
  std::vector<SampleOutcome> sample_traces(const Query& query, std::size_t parallelism);

  const GenLoopConfig& config() const { return config_; }

 private:
  std::string render_history(std::span<const ReasoningStep> steps) const;

  ModelGateway& gateway_;
  ModelEndpoint generator_;
  GenLoopConfig config_;
};

}  // namespace tandem
