#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tandem/jsonl.hpp"

namespace tandem {

inline constexpr std::string_view kTraceSchemaVersion = "v1";

enum class Modality { Image, Video };
enum class TaskKind { MultipleChoice, FreeForm, TemporalGrounding, Jigsaw };

std::string_view to_string(Modality m);
std::string_view to_string(TaskKind k);
Modality modality_from_string(std::string_view text);   // SchemaError
TaskKind task_kind_from_string(std::string_view text);  // SchemaError

/// Closed time interval in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

/// Parses "[start, end]" with finite start <= end. Throws InvalidInterval.
Interval parse_interval(std::string_view text);

/// Parses a 1-based permutation "[p1, ..., pN]" of 1..N with N >= 2.
/// Throws NotAPermutation.
std::vector<int> parse_permutation(std::string_view text);

struct Query {
  std::string id;
  Modality modality = Modality::Image;
  std::vector<std::string> media;
  std::string question;
  std::string ground_truth;
  TaskKind task_kind = TaskKind::FreeForm;
  std::optional<std::string> category;

  bool operator==(const Query&) const = default;
};

/// Structural parse only (keys and types). Semantic checks live in
/// validate_corpus. Throws SchemaError.
Query query_from_json(const Json& doc);
Json to_json(const Query& query);

enum class StepAction { Continue, Summary };

std::string_view to_string(StepAction a);

struct ReasoningStep {
  int index = 1;  // 1-based position in the trace
  std::string brief_summary;
  std::string detail;
  StepAction action = StepAction::Continue;

  bool operator==(const ReasoningStep&) const = default;
};

enum class TraceSource { Generated, AgentReasoner, EvolveRefined };

std::string_view to_string(TraceSource s);

struct ReasoningTrace {
  std::string query_id;
  std::vector<ReasoningStep> steps;
  std::string final_summary;
  std::string final_answer;
  TraceSource source = TraceSource::Generated;
  int sample_index = 0;
  /// Set when the step cap forced the last step's action to summary.
  bool forced_summary = false;

  /// Throws EmptyFieldError / ActionSequenceError / SchemaError.
  void validate() const;
  bool operator==(const ReasoningTrace&) const = default;
};

/// Strict parse of a trace document. Required keys: steps, final_summary,
/// final_answer. Optional metadata: schema, query_id, source, sample_index,
/// forced_summary. Any other key is rejected.
ReasoningTrace parse_trace(std::string_view json_text);
ReasoningTrace trace_from_json(const Json& doc);

Json to_json(const ReasoningTrace& trace);
/// Canonical bytes: sorted keys, UTF-8, newline-terminated.
std::string serialize_trace(const ReasoningTrace& trace);

/// Parses one step object {summary, detail, action}; `index` is assigned.
ReasoningStep step_from_json(const Json& doc, int index);
Json to_json(const ReasoningStep& step);

enum class CorpusViolation { DuplicateId, EmptyField, BadInterval, BadPermutation };

std::string_view to_string(CorpusViolation v);

struct CorpusIssue {
  std::string query_id;
  CorpusViolation kind;
  std::string message;
};

struct CorpusReport {
  std::vector<CorpusIssue> issues;

  std::size_t count(CorpusViolation kind) const;
  std::size_t total() const { return issues.size(); }
  bool clean() const { return issues.empty(); }
};

/// Never throws; reports every violation found.
CorpusReport validate_corpus(std::span<const Query> queries);

}  // namespace tandem
