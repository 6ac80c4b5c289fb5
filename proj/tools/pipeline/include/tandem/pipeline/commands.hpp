#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "tandem/gateway.hpp"

namespace tandem::pipeline {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitOracle = 3,
};

struct CommandOptions {
  std::string command;  // generate | assess | curate | reward-eval | grpo-check | evolve | report
  std::filesystem::path config;
  std::filesystem::path input;   // corpus file or upstream work dir, per command
  std::filesystem::path output;  // work dir; defaults to the config's work_dir
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> parallelism;
  std::filesystem::path mock_script;
  /// Replaces the HTTP / mock transport; used by in-process tests.
  std::shared_ptr<Transport> transport;
};

/// Runs one subcommand, reporting progress to `out` and a one-line structured
/// error summary to `err`. Never throws; returns an ExitCode.
int run_command(const CommandOptions& options, std::ostream& out, std::ostream& err);

// Work-directory file names shared by the stages.
inline constexpr const char* kQueriesFile = "queries.jsonl";
inline constexpr const char* kTracesFile = "traces.jsonl";
inline constexpr const char* kGenerationFailuresFile = "generation_failures.jsonl";
inline constexpr const char* kAssessmentsFile = "assessments.jsonl";
inline constexpr const char* kReasoningSftFile = "reasoning_sft.jsonl";
inline constexpr const char* kSummaryCorpusFile = "summary_corpus.jsonl";
inline constexpr const char* kRetainedIdsFile = "rl_retained_ids.txt";
inline constexpr const char* kDpoPlanFile = "dpo_plan.json";
inline constexpr const char* kCyclePlanFile = "cycle_manifest.json";
inline constexpr const char* kRewardEvalFile = "reward_eval.jsonl";
inline constexpr const char* kGrpoCheckFile = "grpo_check.json";

}  // namespace tandem::pipeline
