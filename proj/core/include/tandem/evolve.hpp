#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tandem/assessment.hpp"
#include "tandem/gateway.hpp"
#include "tandem/trace.hpp"

namespace tandem {

struct SummaryVerdict {
  bool satisfactory = false;
  std::string feedback;  // required when not satisfactory
  std::string answer;

  void validate() const;  // SchemaError
  bool operator==(const SummaryVerdict&) const = default;
};

/// Parses the summarizer envelope {satisfactory, feedback, answer}.
/// Throws SchemaError (or EmptyFieldError) on any violation.
SummaryVerdict parse_verdict(std::string_view reply);
Json to_json(const SummaryVerdict& verdict);

enum class TerminalReason { Satisfactory, MaxIterations, Failed };

std::string_view to_string(TerminalReason r);

struct EvolveIteration {
  ReasoningTrace trace;
  SummaryVerdict verdict;
};

struct EvolveSession {
  std::string query_id;
  std::vector<EvolveIteration> iterations;
  TerminalReason terminal_reason = TerminalReason::Failed;
  bool harvested = false;
  std::optional<std::string> failure;

  const EvolveIteration* last() const {
    return iterations.empty() ? nullptr : &iterations.back();
  }
};

Json to_json(const EvolveSession& session);
EvolveSession session_from_json(const Json& doc);  // SchemaError

/// Reasoner placeholders: {question}, {query_id}, {iteration},
/// {previous_trace}, {feedback}, {revision_block}.
extern const char* const kDefaultReasonerPrompt;
/// Summarizer placeholders: {question}, {query_id}, {iteration}, {trace}.
extern const char* const kDefaultSummarizerPrompt;

struct EvolveConfig {
  std::string reasoner_prompt = kDefaultReasonerPrompt;
  std::string summarizer_prompt = kDefaultSummarizerPrompt;
  int max_iterations = 3;
  int harvest_threshold = 70;
  GenerationParams reasoner_params{.temperature = 0.7, .top_p = 1.0, .max_tokens = 4096, .seed = {}};
  GenerationParams summarizer_params{.temperature = 0.0, .top_p = 1.0, .max_tokens = 1024, .seed = {}};

  void validate() const;  // ConfigError
};

/// Collaborative reasoner <-> summarizer refinement.
class Evolver {
 public:
  Evolver(ModelGateway& gateway, ModelEndpoint reasoner, ModelEndpoint summarizer,
          EvolveConfig config);

  /// `iteration` is 1-based. prev_trace and prev_verdict are both null on the
  /// first iteration and both set afterwards (PreconditionError otherwise).
  /// Each model reply gets one retry on parse failure.
  EvolveIteration run_iteration(const Query& query, const ReasoningTrace* prev_trace,
                                const SummaryVerdict* prev_verdict, int iteration);

  /// Iterates until a satisfactory verdict or config.max_iterations.
  /// Failures end the session with TerminalReason::Failed.
  EvolveSession run_session(const Query& query);

  const EvolveConfig& config() const { return config_; }

 private:
  ModelGateway& gateway_;
  ModelEndpoint reasoner_;
  ModelEndpoint summarizer_;
  EvolveConfig config_;
};

struct HarvestedTrace {
  Query query;
  ReasoningTrace trace;
  int path_score = 0;
};

struct EnrichmentRecord {
  Query query;
  int iteration = 1;
  ReasoningTrace trace;
  SummaryVerdict verdict;
  bool answer_correct = false;
  std::optional<int> path_score;
  std::optional<int> quality_level;
};

Json to_json(const HarvestedTrace& record);
Json to_json(const EnrichmentRecord& record);

struct HarvestResult {
  std::vector<HarvestedTrace> reasoner_sft;
  std::vector<EnrichmentRecord> summary_enrichment;
};

/// Runs every session's iteration traces through the assessment pipeline
/// (answer filter, then one scoring pass per session). A final trace that is
/// answer-correct with path_score >= threshold joins the reasoner corpus and
/// marks the session harvested. Every iteration joins the enrichment corpus.
HarvestResult harvest(std::span<EvolveSession> sessions,
                      const std::map<std::string, Query, std::less<>>& queries, Assessor& assessor,
                      int threshold, std::size_t parallelism = 1);

/// One self-evolution cycle: sessions over the SFT queries, harvest, emit
/// corpora, then an external retraining hook that bumps both agents' tags.
struct CycleManifest {
  int cycle = 1;
  std::string reasoner_in;
  std::string summarizer_in;
  std::string reasoner_out;
  std::string summarizer_out;
  std::string sessions_file;
  std::string reasoner_sft_file;
  std::string summary_enrichment_file;
  std::string retrain_hook;

  bool operator==(const CycleManifest&) const = default;
};

std::vector<CycleManifest> evolve_cycle_plan(int cycles, const std::string& reasoner_tag = "reasoner",
                                             const std::string& summarizer_tag = "summarizer");
bool cycle_plan_is_chained(std::span<const CycleManifest> plan);

Json to_json(std::span<const CycleManifest> plan);
std::vector<CycleManifest> cycle_plan_from_json(const Json& doc);  // SchemaError

}  // namespace tandem
