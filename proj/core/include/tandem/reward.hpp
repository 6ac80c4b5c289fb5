#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tandem/trace.hpp"

namespace tandem {

/// Rule-based task families scored by the reasoning-agent reward.
enum class RewardTask { ExactMatch, TemporalGrounding, Jigsaw };

std::string_view to_string(RewardTask t);
RewardTask reward_task_from_string(std::string_view text);  // SchemaError
/// multiple_choice and free_form map to ExactMatch.
RewardTask reward_task_for(TaskKind kind);

/// What the format reward checks.
enum class FormatMode {
  FullTrace,       // output must parse as a complete trace document
  AnswerEnvelope,  // output must contain exactly one <answer>...</answer>
};

/// 1 iff the output satisfies `mode`, else 0.
double format_reward(std::string_view output, FormatMode mode = FormatMode::FullTrace);

/// Final answer carried by an output under `mode`, if it has one.
std::optional<std::string> extract_answer(std::string_view output, FormatMode mode);

/// trim, ASCII case-fold, collapse internal whitespace, strip trailing
/// punctuation, and unwrap a parenthesised single option letter.
std::string normalize_answer(std::string_view text);

double exact_match_reward(std::string_view predicted, std::string_view ground_truth);

/// |tp ∩ tg| / |tp ∪ tg|; identical zero-length intervals score 1, distinct
/// ones 0. Throws InvalidInterval.
double iou_reward(const Interval& predicted, const Interval& truth);

/// Fraction of positions where p[i] == g[i]. Throws LengthMismatch or
/// NotAPermutation.
double jigsaw_reward(std::span<const int> predicted, std::span<const int> truth);

using Prediction = std::variant<std::monostate, std::string, Interval, std::vector<int>>;

/// Parses an answer string for `task`; monostate when unparsable.
Prediction parse_prediction(RewardTask task, std::string_view answer);

struct RewardBreakdown {
  double r_task = 0.0;
  double r_format = 0.0;
  std::optional<double> r_judge;   // summary-agent reward only
  std::optional<double> r_answer;  // summary-agent reward only
  std::optional<double> alpha;
  double total = 0.0;
  std::optional<std::string> note;
};

Json to_json(const RewardBreakdown& breakdown);

inline constexpr double kTaskWeight = 0.9;
inline constexpr double kFormatWeight = 0.1;

/// 0.9 * r_task + 0.1 * r_format. An unparsable prediction (monostate)
/// or an unparsable ground truth yields r_task = 0 with a note.
RewardBreakdown st_grpo_reward(RewardTask task, std::string_view output,
                               const Prediction& prediction, std::string_view ground_truth,
                               FormatMode mode = FormatMode::FullTrace);

/// Curriculum stage of the summary-agent reward. Alpha is a function of the
/// stage, so an inconsistent (stage, alpha) pair cannot be constructed.
class CurriculumStage {
 public:
  enum class Id { Stage1, Stage2 };

  static constexpr CurriculumStage stage1() { return CurriculumStage(Id::Stage1); }
  static constexpr CurriculumStage stage2() { return CurriculumStage(Id::Stage2); }

  constexpr Id id() const { return id_; }
  /// Weight on r_judge: 0.5 in stage 1 (equal weighting), 0.3 in stage 2 (3:7).
  constexpr double alpha() const { return id_ == Id::Stage1 ? 0.5 : 0.3; }
  constexpr bool operator==(const CurriculumStage&) const = default;

 private:
  constexpr explicit CurriculumStage(Id id) : id_(id) {}
  Id id_;
};

std::string_view to_string(CurriculumStage stage);

/// stage1 while step_fraction < switch_point, stage2 from the switch on.
CurriculumStage curriculum_stage(double step_fraction, double switch_point = 0.5);

/// 0.9 * (alpha * r_judge + (1 - alpha) * r_answer) + 0.1 * r_format.
/// r_judge is exact level match, or 1 - |Δlevel| / 4 when `graded_judge`.
/// Throws RangeError for levels outside 1..5 or rewards outside {0, 1}.
RewardBreakdown j_grpo_reward(int predicted_level, int true_level, double answer_reward,
                              double format_reward, CurriculumStage stage,
                              bool graded_judge = false);

/// Summary-agent output envelope {"quality_level": 1..5, "answer": "..."}.
struct JudgeOutput {
  int quality_level = 0;
  std::string answer;
};

std::optional<JudgeOutput> parse_judge_output(std::string_view output);

}  // namespace tandem
