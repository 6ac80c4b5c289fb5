#include "tandem/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tandem/error.hpp"

namespace tandem {
namespace {

constexpr std::string_view kOpenTag = "<answer>";
constexpr std::string_view kCloseTag = "</answer>";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::size_t count_of(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::optional<std::string> envelope_content(std::string_view output) {
  if (count_of(output, kOpenTag) != 1 || count_of(output, kCloseTag) != 1) return std::nullopt;
  const auto open = output.find(kOpenTag);
  const auto close = output.find(kCloseTag);
  if (close < open) return std::nullopt;
  std::string inner = trim(output.substr(open + kOpenTag.size(), close - open - kOpenTag.size()));
  if (inner.empty()) return std::nullopt;
  return inner;
}

void check_interval(const Interval& iv, const char* which) {
  if (!std::isfinite(iv.start) || !std::isfinite(iv.end) || iv.start > iv.end) {
    throw InvalidInterval(std::string(which) + " interval is not a finite [start <= end] pair");
  }
}

void check_permutation(std::span<const int> p, const char* which) {
  std::vector<bool> seen(p.size() + 1, false);
  for (int v : p) {
    if (v < 1 || static_cast<std::size_t>(v) > p.size() || seen[v]) {
      throw NotAPermutation(std::string(which) + " sequence is not a permutation of 1..N");
    }
    seen[v] = true;
  }
}

}  // namespace

std::string_view to_string(RewardTask t) {
  switch (t) {
    case RewardTask::ExactMatch: return "exact_match";
    case RewardTask::TemporalGrounding: return "temporal_grounding";
    case RewardTask::Jigsaw: return "jigsaw";
  }
  return "unknown";
}

RewardTask reward_task_from_string(std::string_view text) {
  for (auto t : {RewardTask::ExactMatch, RewardTask::TemporalGrounding, RewardTask::Jigsaw}) {
    if (to_string(t) == text) return t;
  }
  throw SchemaError("unknown reward task '" + std::string(text) + "'");
}

RewardTask reward_task_for(TaskKind kind) {
  switch (kind) {
    case TaskKind::TemporalGrounding: return RewardTask::TemporalGrounding;
    case TaskKind::Jigsaw: return RewardTask::Jigsaw;
    case TaskKind::MultipleChoice:
    case TaskKind::FreeForm: break;
  }
  return RewardTask::ExactMatch;
}

double format_reward(std::string_view output, FormatMode mode) {
  if (mode == FormatMode::AnswerEnvelope) return envelope_content(output) ? 1.0 : 0.0;
  try {
    parse_trace(output);
    return 1.0;
  } catch (const SchemaError&) {
    return 0.0;
  }
}

std::optional<std::string> extract_answer(std::string_view output, FormatMode mode) {
  if (mode == FormatMode::AnswerEnvelope) return envelope_content(output);
  try {
    return parse_trace(output).final_answer;
  } catch (const SchemaError&) {
    return std::nullopt;
  }
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && std::string_view(".,;:!?").find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.size() == 3 && out.front() == '(' && out.back() == ')' &&
      std::isalpha(static_cast<unsigned char>(out[1]))) {
    out = out.substr(1, 1);
  }
  return out;
}

double exact_match_reward(std::string_view predicted, std::string_view ground_truth) {
  return normalize_answer(predicted) == normalize_answer(ground_truth) ? 1.0 : 0.0;
}

double iou_reward(const Interval& predicted, const Interval& truth) {
  check_interval(predicted, "predicted");
  check_interval(truth, "ground-truth");
  const double inter =
      std::max(0.0, std::min(predicted.end, truth.end) - std::max(predicted.start, truth.start));
  const double uni = predicted.length() + truth.length() - inter;
  if (uni <= 0.0) return predicted == truth ? 1.0 : 0.0;
  return inter / uni;
}

double jigsaw_reward(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("jigsaw prediction has " + std::to_string(predicted.size()) +
                         " positions, ground truth " + std::to_string(truth.size()));
  }
  if (truth.empty()) throw NotAPermutation("jigsaw sequences must be non-empty");
  check_permutation(predicted, "predicted");
  check_permutation(truth, "ground-truth");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Prediction parse_prediction(RewardTask task, std::string_view answer) {
  switch (task) {
    case RewardTask::ExactMatch: {
      std::string text = trim(answer);
      if (text.empty()) return std::monostate{};
      return text;
    }
    case RewardTask::TemporalGrounding:
      try {
        return parse_interval(answer);
      } catch (const InvalidInterval&) {
        return std::monostate{};
      }
    case RewardTask::Jigsaw:
      try {
        return parse_permutation(answer);
      } catch (const NotAPermutation&) {
        return std::monostate{};
      }
  }
  return std::monostate{};
}

Json to_json(const RewardBreakdown& b) {
  Json doc = {{"r_task", b.r_task}, {"r_format", b.r_format}, {"total", b.total}};
  if (b.r_judge) doc["r_judge"] = *b.r_judge;
  if (b.r_answer) doc["r_answer"] = *b.r_answer;
  if (b.alpha) doc["alpha"] = *b.alpha;
  if (b.note) doc["note"] = *b.note;
  return doc;
}

RewardBreakdown st_grpo_reward(RewardTask task, std::string_view output,
                               const Prediction& prediction, std::string_view ground_truth,
                               FormatMode mode) {
  RewardBreakdown b;
  b.r_format = format_reward(output, mode);
  if (std::holds_alternative<std::monostate>(prediction)) {
    b.note = "unparsable prediction";
  } else {
    switch (task) {
      case RewardTask::ExactMatch:
        if (const auto* p = std::get_if<std::string>(&prediction)) {
          b.r_task = exact_match_reward(*p, ground_truth);
        } else {
          b.note = "prediction is not a text answer";
        }
        break;
      case RewardTask::TemporalGrounding:
        if (const auto* p = std::get_if<Interval>(&prediction)) {
          try {
            b.r_task = iou_reward(*p, parse_interval(ground_truth));
          } catch (const InvalidInterval& e) {
            b.note = std::string("unparsable ground truth: ") + e.what();
          }
        } else {
          b.note = "prediction is not an interval";
        }
        break;
      case RewardTask::Jigsaw:
        if (const auto* p = std::get_if<std::vector<int>>(&prediction)) {
          try {
            b.r_task = jigsaw_reward(*p, parse_permutation(ground_truth));
          } catch (const NotAPermutation& e) {
            b.note = std::string("unparsable ground truth: ") + e.what();
          } catch (const LengthMismatch& e) {
            b.note = e.what();
          }
        } else {
          b.note = "prediction is not a permutation";
        }
        break;
    }
  }
  b.total = kTaskWeight * b.r_task + kFormatWeight * b.r_format;
  return b;
}

std::string_view to_string(CurriculumStage stage) {
  return stage.id() == CurriculumStage::Id::Stage1 ? "stage1" : "stage2";
}

CurriculumStage curriculum_stage(double step_fraction, double switch_point) {
  if (!(step_fraction >= 0.0 && step_fraction <= 1.0)) {
    throw RangeError("step fraction must lie in [0, 1]");
  }
  if (!(switch_point > 0.0 && switch_point <= 1.0)) {
    throw RangeError("curriculum switch point must lie in (0, 1]");
  }
  return step_fraction < switch_point ? CurriculumStage::stage1() : CurriculumStage::stage2();
}

RewardBreakdown j_grpo_reward(int predicted_level, int true_level, double answer_reward,
                              double format_reward, CurriculumStage stage, bool graded_judge) {
  auto level_ok = [](int l) { return l >= 1 && l <= 5; };
  auto binary = [](double r) { return r == 0.0 || r == 1.0; };
  if (!level_ok(predicted_level) || !level_ok(true_level)) {
    throw RangeError("quality levels must lie in 1..5");
  }
  if (!binary(answer_reward) || !binary(format_reward)) {
    throw RangeError("answer and format rewards must be 0 or 1");
  }
  RewardBreakdown b;
  const double alpha = stage.alpha();
  const double r_judge = graded_judge
                             ? 1.0 - std::abs(predicted_level - true_level) / 4.0
                             : (predicted_level == true_level ? 1.0 : 0.0);
  b.r_judge = r_judge;
  b.r_answer = answer_reward;
  b.r_task = alpha * r_judge + (1.0 - alpha) * answer_reward;
  b.r_format = format_reward;
  b.alpha = alpha;
  b.total = kTaskWeight * b.r_task + kFormatWeight * format_reward;
  return b;
}

std::optional<JudgeOutput> parse_judge_output(std::string_view output) {
  const Json doc = extract_json_object(output);
  if (doc.is_discarded() || !doc.is_object() || doc.size() != 2) return std::nullopt;
  const auto level = doc.find("quality_level");
  const auto answer = doc.find("answer");
  if (level == doc.end() || answer == doc.end()) return std::nullopt;
  if (!level->is_number_integer() || !answer->is_string()) return std::nullopt;
  JudgeOutput out{level->get<int>(), answer->get<std::string>()};
  if (out.quality_level < 1 || out.quality_level > 5 || trim(out.answer).empty()) {
    return std::nullopt;
  }
  return out;
}

}  // namespace tandem
