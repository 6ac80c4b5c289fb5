#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tandem/gateway.hpp"
#include "tandem/trace.hpp"

namespace tandem {

struct AssessmentResult {
  std::string query_id;
  int sample_index = 0;
  bool answer_correct = false;
  std::optional<int> path_score;     // 1..100, only for answer-correct traces
  std::optional<int> quality_level;  // quality_level(*path_score)
  std::optional<std::string> flaws;
  std::optional<std::string> error;  // per-trace failure, never aborts a group

  bool scored() const { return path_score.has_value(); }
  bool operator==(const AssessmentResult&) const = default;
};

Json to_json(const AssessmentResult& result);
AssessmentResult assessment_from_json(const Json& doc);  // SchemaError

/// Equal-width quintile bucket: ceil(score / 20). RangeError outside 1..100.
int quality_level(int path_score);

enum class ExemplarCategory {
  GeneralUnderstanding,
  TemporalGrounding,
  CausalReasoning,
  FineGrainedAnalysis,
};

std::string_view to_string(ExemplarCategory c);
std::optional<ExemplarCategory> exemplar_category_from_string(std::string_view text);

/// Human-verified video reasoning case shown to the scorer in context.
struct GoldenExemplar {
  ExemplarCategory category = ExemplarCategory::GeneralUnderstanding;
  std::string query_summary;
  ReasoningTrace exemplar_trace;
  std::string provenance;
};

GoldenExemplar exemplar_from_json(const Json& doc);  // SchemaError
Json to_json(const GoldenExemplar& exemplar);

/// All exemplars of the query's category; one per category (first in bank
/// order) when the query has no category or nothing matches it.
std::vector<const GoldenExemplar*> select_exemplars(const Query& query,
                                                    std::span<const GoldenExemplar> bank);

/// Judge prompt placeholders: {question}, {final_answer}, {ground_truth}.
extern const char* const kDefaultJudgePrompt;
/// Scorer placeholders: {question}, {ground_truth}, {count}, {paths},
/// {exemplars}, {query_id}.
extern const char* const kDefaultScorerPrompt;
/// Flaw placeholders: {question}, {ground_truth}, {trace}.
extern const char* const kDefaultFlawPrompt;

struct AssessmentConfig {
  std::string judge_prompt = kDefaultJudgePrompt;
  std::string scorer_prompt = kDefaultScorerPrompt;
  std::string flaw_prompt = kDefaultFlawPrompt;
  bool annotate_flaws = false;
  GenerationParams judge_params{.temperature = 0.0, .top_p = 1.0, .max_tokens = 16, .seed = {}};
  GenerationParams scorer_params{.temperature = 0.0, .top_p = 1.0, .max_tokens = 512, .seed = {}};
  GenerationParams flaw_params{.temperature = 0.0, .top_p = 1.0, .max_tokens = 1024, .seed = {}};
};

/// Answer filtering, single-pass path scoring and flaw annotation.
class Assessor {
 public:
  Assessor(ModelGateway& gateway, ModelEndpoint judge, ModelEndpoint scorer,
           std::optional<ModelEndpoint> flaw_annotator, AssessmentConfig config,
           std::vector<GoldenExemplar> exemplar_bank = {});

  /// Judge compares final_answer with ground truth and replies yes/no.
  bool filter_answer(const Query& query, const ReasoningTrace& trace);

  /// One scorer call for all traces; returns one score in 1..100 per trace.
  std::vector<int> score_paths(const Query& query, std::span<const ReasoningTrace> traces);

  std::string annotate_flaws(const Query& query, const ReasoningTrace& trace);

  /// filter -> score survivors in one pass -> derive levels -> annotate.
  std::vector<AssessmentResult> assess_group(const Query& query,
                                             std::span<const ReasoningTrace> traces);

  const AssessmentConfig& config() const { return config_; }

 private:
  void require_exemplars(const Query& query) const;

  ModelGateway& gateway_;
  ModelEndpoint judge_;
  ModelEndpoint scorer_;
  std::optional<ModelEndpoint> flaw_annotator_;
  AssessmentConfig config_;
  std::vector<GoldenExemplar> bank_;
};

/// Parses a constrained yes/no verdict; nullopt when neither token matches.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Parses {"scores": [...]} with `expected` entries each in 1..100.
/// nullopt on any violation.
std::optional<std::vector<int>> parse_scores(std::string_view reply, std::size_t expected);

}  // namespace tandem
