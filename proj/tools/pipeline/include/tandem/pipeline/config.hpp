#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tandem/assessment.hpp"
#include "tandem/curation.hpp"
#include "tandem/evolve.hpp"
#include "tandem/gateway.hpp"
#include "tandem/grpo.hpp"
#include "tandem/tracegen.hpp"

namespace tandem::pipeline {

struct Prompts {
  std::string step = kDefaultStepPrompt;
  std::string final_answer = kDefaultAnswerPrompt;
  std::string judge = kDefaultJudgePrompt;
  std::string scorer = kDefaultScorerPrompt;
  std::string flaw = kDefaultFlawPrompt;
  std::string reasoner = kDefaultReasonerPrompt;
  std::string summarizer = kDefaultSummarizerPrompt;
};

struct GenerationSettings {
  std::string generator;  // endpoint name; empty = first generator in the roster
  int n_samples = 8;
  int max_steps = 10;
  double temperature_min = 0.7;
  double temperature_max = 1.0;
  double top_p = 1.0;
  int max_tokens = 4096;
};

struct AssessmentSettings {
  std::string judge;
  std::string scorer;
  std::string flaw_annotator;
  bool annotate_flaws = false;
  std::filesystem::path exemplars;  // JSONL of golden exemplars; resolved against the config dir
};

struct CurationSettings {
  SummaryCorpusSpec summary = SummaryCorpusSpec::defaults();
  int round = 1;
  int dpo_rounds = 3;
  std::string model_tag = "M";
  int min_gap = 20;
  std::size_t pairs_limit = 0;  // 0 keeps every pair
  PassKPolicy passk;
};

struct RewardSettings {
  double curriculum_switch = 0.5;
  bool graded_judge = false;
};

struct EvolveSettings {
  std::string reasoner;
  std::string summarizer;
  int max_iterations = 3;
  int harvest_threshold = 70;
  int cycle = 1;
  int cycles = 1;
  std::string reasoner_tag = "reasoner";
  std::string summarizer_tag = "summarizer";
  double reasoner_temperature = 0.7;
};

struct OracleSettings {
  int gradient_instances = 100;
  int advantage_groups = 1000;
  int clip_samples = 10000;
};

/// Everything a pipeline stage needs. Built from a JSON document; unknown keys
/// are rejected so typos surface as config errors.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  GatewayOptions gateway;
  std::vector<ModelEndpoint> endpoints;
  Prompts prompts;
  GenerationSettings generation;
  AssessmentSettings assessment;
  CurationSettings curation;
  GrpoConfig grpo;
  RewardSettings reward;
  EvolveSettings evolve;
  OracleSettings oracle;
  std::filesystem::path work_dir = ".";
  Json source;  // effective document after overrides, hashed into manifests

  /// Throws ConfigError. `base_dir` resolves relative paths.
  static RunConfig from_json(const Json& doc, const std::filesystem::path& base_dir = ".");
  static RunConfig load(const std::filesystem::path& path,
                        std::optional<std::uint64_t> seed_override = std::nullopt);

  std::string hash() const;

  /// Endpoint by configured name, or the first with `role` when name is empty.
  /// ConfigError when missing or bound to a different role.
  const ModelEndpoint& resolve(const std::string& name, EndpointRole role) const;

  GenLoopConfig gen_loop() const;
  AssessmentConfig assessment_config() const;
  EvolveConfig evolve_config() const;
};

}  // namespace tandem::pipeline
