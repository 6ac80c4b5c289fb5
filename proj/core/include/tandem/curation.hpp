#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tandem/assessment.hpp"
#include "tandem/trace.hpp"

namespace tandem {

/// One query with its sampled traces and their assessments, aligned by
/// position (results[i] describes traces[i]).
struct AssessedGroup {
  Query query;
  std::vector<ReasoningTrace> traces;
  std::vector<AssessmentResult> results;
};

/// Joins traces and results on (query_id, sample_index). Queries without
/// traces are kept with empty groups. Groups come back sorted by query id.
/// Throws DataError on a dangling or duplicate key.
std::vector<AssessedGroup> join_assessments(std::span<const Query> queries,
                                            std::span<const ReasoningTrace> traces,
                                            std::span<const AssessmentResult> results);

/// Highest path_score among answer-correct traces; ties go to fewer steps,
/// then lower sample_index. Throws NoSurvivor.
ReasoningTrace select_best_path(std::span<const AssessmentResult> results,
                                std::span<const ReasoningTrace> traces);

struct ReasoningSftRecord {
  Query query;
  ReasoningTrace trace;
  int path_score = 0;
};

struct ReasoningSftCorpus {
  std::vector<ReasoningSftRecord> records;
  std::vector<std::string> dropped;  // queries with no surviving trace
};

ReasoningSftCorpus build_reasoning_sft(std::span<const AssessedGroup> groups);
Json to_json(const ReasoningSftRecord& record);

struct ScoreStratum {
  int lo = 1;
  int hi = 100;
  double fraction = 0.0;
};

struct SummaryCorpusSpec {
  std::vector<ScoreStratum> strata;
  double optimal_fraction = 0.0;
  double agent_pair_fraction = 0.0;
  double plain_qa_fraction = 0.0;
  /// Records to emit; 0 means one per assessed group.
  std::size_t total = 0;

  void validate() const;  // ConfigError
  /// Flawed strata [1,33], [34,66], [67,99] at 0.15 each, optimal 0.30,
  /// agent pairs 0.10, plain QA 0.15.
  static SummaryCorpusSpec defaults();
};

enum class SummaryRecordKind { Optimal, Flawed, AgentPair, PlainQa };

std::string_view to_string(SummaryRecordKind k);

struct SummaryRecord {
  SummaryRecordKind kind = SummaryRecordKind::PlainQa;
  Query query;
  std::optional<ReasoningTrace> reasoning;
  std::string target_answer;
  std::optional<int> path_score;
  std::optional<std::string> flaws;
  std::optional<std::size_t> stratum;  // index into spec.strata for Flawed
};

Json to_json(const SummaryRecord& record);

struct CategoryCount {
  std::string name;
  std::size_t requested = 0;  // from the fractions before reallocation
  std::size_t emitted = 0;
  std::size_t candidates = 0;
};

struct SummaryCorpus {
  std::vector<SummaryRecord> records;
  std::vector<CategoryCount> counts;  // strata first, then optimal/agent_pair/plain_qa
  std::vector<std::string> notices;   // InsufficientStratum reports
};

/// Largest-remainder apportionment of `total` over `weights`; the result
/// sums to `total` exactly. Zero-weight slots receive zero.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

/// Mixed summary-agent corpus. Pure function of (groups, spec, seed).
SummaryCorpus build_summary_corpus(std::span<const AssessedGroup> groups,
                                   const SummaryCorpusSpec& spec, std::uint64_t seed);

struct PreferencePair {
  std::string query_id;
  ReasoningTrace chosen;
  ReasoningTrace rejected;
  int round = 1;
  int chosen_score = 0;
  std::optional<int> rejected_score;  // absent when the rejected trace was filtered out
};

Json to_json(const PreferencePair& pair);

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<std::string> skipped;
};

/// chosen = best survivor; rejected = lowest survivor when at least
/// `min_gap` points below, else the first filtered (answer-incorrect) trace.
PairBuildResult build_preference_pairs(std::span<const AssessedGroup> groups, int round,
                                       int min_gap = 20);

/// Seeded subsample down to `limit` pairs, preserving query order.
std::vector<PreferencePair> subsample_pairs(std::vector<PreferencePair> pairs,
                                            std::size_t limit, std::uint64_t seed);

struct PassKRecord {
  std::string query_id;
  int attempts = 0;
  int successes = 0;

  double pass_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(successes) / attempts;
  }
};

PassKRecord passk_from_json(const Json& doc);  // SchemaError

struct PassKPolicy {
  int k = 8;
  double max_pass_rate = 0.75;
  bool retain_zero = true;
};

/// Keeps challenging queries: 0 < pass_rate <= max_pass_rate, plus
/// pass_rate == 0 when retain_zero. Throws KMismatch.
std::vector<std::string> reject_sample_passk(std::span<const PassKRecord> records,
                                             const PassKPolicy& policy);

}  // namespace tandem
