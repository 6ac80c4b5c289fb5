#include "tandem/pipeline/commands.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "tandem/assessment.hpp"
#include "tandem/curation.hpp"
#include "tandem/error.hpp"
#include "tandem/evolve.hpp"
#include "tandem/oracle/oracle.hpp"
#include "tandem/parallel.hpp"
#include "tandem/pipeline/config.hpp"
#include "tandem/pipeline/manifest.hpp"
#include "tandem/reward.hpp"
#include "tandem/tracegen.hpp"

namespace tandem::pipeline {
namespace {

namespace fs = std::filesystem;

struct OracleFailure : Error {
  using Error::Error;
};

struct Context {
  RunConfig cfg;
  fs::path input;
  fs::path out_dir;
  std::shared_ptr<Transport> transport;
  std::ostream& out;
};

// ---------------------------------------------------------------------------
// Readers. Every schema problem is re-raised as a DataError naming file:line.

template <typename T, typename Parse>
std::vector<T> read_rows(const fs::path& path, Parse parse) {
  if (!fs::exists(path)) throw DataError("missing input file " + path.string());
  std::vector<T> rows;
  for (const auto& line : read_jsonl(path)) {
    try {
      rows.push_back(parse(line.value));
    } catch (const Error& e) {
      throw DataError(path.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<Query> read_queries(const fs::path& path) {
  return read_rows<Query>(path, [](const Json& j) { return query_from_json(j); });
}

std::vector<ReasoningTrace> read_traces(const fs::path& path) {
  return read_rows<ReasoningTrace>(path, [](const Json& j) {
    ReasoningTrace t = trace_from_json(j);
    t.validate();
    return t;
  });
}

std::vector<AssessmentResult> read_assessments(const fs::path& path) {
  return read_rows<AssessmentResult>(path, [](const Json& j) { return assessment_from_json(j); });
}

std::vector<GoldenExemplar> read_exemplars(const RunConfig& cfg) {
  if (cfg.assessment.exemplars.empty()) return {};
  try {
    return read_rows<GoldenExemplar>(cfg.assessment.exemplars,
                                     [](const Json& j) { return exemplar_from_json(j); });
  } catch (const DataError& e) {
    throw ConfigError(std::string("exemplar bank: ") + e.what());
  }
}

void require_video_exemplars(std::span<const Query> queries,
                             std::span<const GoldenExemplar> bank) {
  for (const auto& q : queries) {
    if (q.modality == Modality::Video && select_exemplars(q, bank).empty()) {
      throw ConfigError(q.id + ": video queries need a golden exemplar bank (assessment.exemplars)");
    }
  }
}

std::map<std::string, Query, std::less<>> index_queries(std::span<const Query> queries) {
  std::map<std::string, Query, std::less<>> out;
  for (const auto& q : queries) {
    if (!out.emplace(q.id, q).second) throw DataError("duplicate query id " + q.id);
  }
  return out;
}

StageManifest make_manifest(const Context& ctx, const std::string& stage) {
  return StageManifest(stage, ctx.cfg.hash(), ctx.cfg.seed);
}

fs::path input_dir(const Context& ctx) { return ctx.input.empty() ? ctx.out_dir : ctx.input; }

// ---------------------------------------------------------------------------

int cmd_generate(Context& ctx) {
  const fs::path corpus = ctx.input.empty() ? ctx.out_dir / kQueriesFile : ctx.input;
  const ModelEndpoint generator =
      ctx.cfg.resolve(ctx.cfg.generation.generator, EndpointRole::Generator);
  const GenLoopConfig loop = ctx.cfg.gen_loop();
  loop.validate();

  const std::vector<Query> queries = read_queries(corpus);
  if (queries.empty()) throw DataError(corpus.string() + ": empty query corpus");
  const CorpusReport report = validate_corpus(queries);
  if (!report.clean()) {
    std::string msg = corpus.string() + ": " + std::to_string(report.total()) + " corpus violation(s)";
    for (std::size_t i = 0; i < std::min<std::size_t>(report.issues.size(), 5); ++i) {
      msg += "; " + report.issues[i].query_id + ": " + report.issues[i].message;
    }
    throw DataError(msg);
  }

  StageManifest manifest = make_manifest(ctx, "generate");
  manifest.input(corpus);
  ModelGateway gateway(ctx.cfg.endpoints, ctx.transport, ctx.cfg.gateway);
  TraceGenerator gen(gateway, generator, loop);

  std::vector<std::vector<SampleOutcome>> outcomes(queries.size());
  parallel_for(queries.size(), ctx.cfg.parallelism,
               [&](std::size_t i) { outcomes[i] = gen.sample_traces(queries[i], 1); });
  manifest.mark("sampling");

  std::vector<Json> query_rows, trace_rows, failure_rows;
  for (const auto& q : queries) query_rows.push_back(to_json(q));
  manifest.counter("queries", static_cast<std::int64_t>(queries.size()));
  manifest.counter("traces", 0);
  manifest.counter("failed_samples", 0);
  manifest.counter("forced_summaries", 0);
  manifest.counter("steps", 0);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (const auto& o : outcomes[i]) {
      manifest.add("samples");
      if (!o.ok()) {
        manifest.add("failed_samples");
        failure_rows.push_back(
            {{"query_id", queries[i].id}, {"sample_index", o.sample_index}, {"error", o.error}});
        continue;
      }
      manifest.add("traces");
      manifest.add("steps", static_cast<std::int64_t>(o.trace->steps.size()));
      if (o.trace->forced_summary) manifest.add("forced_summaries");
      trace_rows.push_back(to_json(*o.trace));
    }
  }
  if (trace_rows.empty()) {
    throw DataError("no trace could be generated; first failure: " +
                    (failure_rows.empty() ? std::string("none")
                                          : failure_rows.front()["error"].get<std::string>()));
  }
  const GatewayStats stats = gateway.stats();
  manifest.counter("model_calls", static_cast<std::int64_t>(stats.successes));
  manifest.counter("model_attempts", static_cast<std::int64_t>(stats.attempts));

  OutputSet outputs;
  outputs.add_jsonl(kQueriesFile, query_rows);
  outputs.add_jsonl(kTracesFile, trace_rows);
  outputs.add_jsonl(kGenerationFailuresFile, failure_rows);
  outputs.publish(ctx.out_dir, manifest);
  ctx.out << "generate: " << queries.size() << " queries, " << trace_rows.size() << " traces, "
          << failure_rows.size() << " failed samples, " << manifest.get("forced_summaries")
          << " forced summaries\n";
  return kExitOk;
}

int cmd_assess(Context& ctx) {
  const fs::path dir = input_dir(ctx);
  const ModelEndpoint judge = ctx.cfg.resolve(ctx.cfg.assessment.judge, EndpointRole::AnswerJudge);
  const ModelEndpoint scorer = ctx.cfg.resolve(ctx.cfg.assessment.scorer, EndpointRole::PathScorer);
  std::optional<ModelEndpoint> flaw;
  if (ctx.cfg.assessment.annotate_flaws) {
    flaw = ctx.cfg.resolve(ctx.cfg.assessment.flaw_annotator, EndpointRole::AnswerJudge);
  }
  std::vector<GoldenExemplar> bank = read_exemplars(ctx.cfg);

  const std::vector<Query> queries = read_queries(dir / kQueriesFile);
  const std::vector<ReasoningTrace> traces = read_traces(dir / kTracesFile);
  const auto by_id = index_queries(queries);

  std::vector<std::vector<ReasoningTrace>> groups(queries.size());
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < queries.size(); ++i) position[queries[i].id] = i;
  for (const auto& t : traces) {
    const auto it = position.find(t.query_id);
    if (it == position.end()) throw DataError("trace for unknown query " + t.query_id);
    groups[it->second].push_back(t);
  }
  std::vector<Query> with_traces;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!groups[i].empty()) with_traces.push_back(queries[i]);
  }
  require_video_exemplars(with_traces, bank);

  StageManifest manifest = make_manifest(ctx, "assess");
  manifest.input(dir / kQueriesFile);
  manifest.input(dir / kTracesFile);
  if (!ctx.cfg.assessment.exemplars.empty()) manifest.input(ctx.cfg.assessment.exemplars);

  ModelGateway gateway(ctx.cfg.endpoints, ctx.transport, ctx.cfg.gateway);
  Assessor assessor(gateway, judge, scorer, flaw, ctx.cfg.assessment_config(), std::move(bank));
  std::vector<std::vector<AssessmentResult>> results(queries.size());
  parallel_for(queries.size(), ctx.cfg.parallelism, [&](std::size_t i) {
    if (!groups[i].empty()) results[i] = assessor.assess_group(queries[i], groups[i]);
  });
  manifest.mark("assessment");

  std::vector<Json> rows;
  for (const char* name : {"groups", "traces", "answer_correct", "filtered", "scored", "errors"}) {
    manifest.counter(name, 0);
  }
  for (int level = 1; level <= 5; ++level) manifest.counter("quality_level_" + std::to_string(level), 0);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (groups[i].empty()) continue;
    manifest.add("groups");
    for (const auto& r : results[i]) {
      manifest.add("traces");
      if (r.error) manifest.add("errors");
      if (r.answer_correct) manifest.add("answer_correct");
      if (!r.answer_correct && !r.error) manifest.add("filtered");
      if (r.scored()) {
        manifest.add("scored");
        manifest.add("quality_level_" + std::to_string(*r.quality_level));
      }
      rows.push_back(to_json(r));
    }
  }
  const GatewayStats stats = gateway.stats();
  const auto calls = [&](const std::string& name) {
    const auto it = stats.calls_by_endpoint.find(name);
    return static_cast<std::int64_t>(it == stats.calls_by_endpoint.end() ? 0 : it->second);
  };
  manifest.counter("judge_calls", calls(judge.name));
  manifest.counter("scorer_calls", calls(scorer.name));
  manifest.counter("model_attempts", static_cast<std::int64_t>(stats.attempts));

  OutputSet outputs;
  outputs.add_jsonl(kAssessmentsFile, rows);
  outputs.publish(ctx.out_dir, manifest);
  ctx.out << "assess: " << manifest.get("groups") << " groups, " << manifest.get("traces")
          << " traces, " << manifest.get("filtered") << " filtered, " << manifest.get("scored")
          << " scored, " << manifest.get("errors") << " errors\n";
  return kExitOk;
}

int cmd_curate(Context& ctx) {
  const fs::path dir = input_dir(ctx);
  const CurationSettings& cs = ctx.cfg.curation;
  if (cs.round > cs.dpo_rounds) throw ConfigError("curation.round exceeds curation.dpo_rounds");

  const std::vector<Query> queries = read_queries(dir / kQueriesFile);
  const std::vector<ReasoningTrace> traces = read_traces(dir / kTracesFile);
  const std::vector<AssessmentResult> results = read_assessments(dir / kAssessmentsFile);
  if (results.empty()) throw DataError((dir / kAssessmentsFile).string() + ": no assessed groups");

  StageManifest manifest = make_manifest(ctx, "curate");
  for (const char* f : {kQueriesFile, kTracesFile, kAssessmentsFile}) manifest.input(dir / f);

  const std::vector<AssessedGroup> groups = join_assessments(queries, traces, results);
  const ReasoningSftCorpus sft = build_reasoning_sft(groups);
  const SummaryCorpus summary = build_summary_corpus(groups, cs.summary, ctx.cfg.seed);
  PairBuildResult pairs = build_preference_pairs(groups, cs.round, cs.min_gap);
  if (cs.pairs_limit > 0) {
    pairs.pairs = subsample_pairs(std::move(pairs.pairs), cs.pairs_limit, ctx.cfg.seed);
  }

  // Samples that never produced a trace still count as failed attempts.
  std::map<std::string, int> failed_samples;
  const fs::path failures_path = dir / kGenerationFailuresFile;
  if (fs::exists(failures_path)) {
    manifest.input(failures_path);
    for (const auto& line : read_jsonl(failures_path)) {
      try {
        ++failed_samples[line.value.at("query_id").get<std::string>()];
      } catch (const Json::exception& e) {
        throw DataError(failures_path.string() + ":" + std::to_string(line.line_number) + ": " +
                        e.what());
      }
    }
  }
  std::vector<PassKRecord> passk;
  for (const auto& g : groups) {
    const auto failed = failed_samples.find(g.query.id);
    const int failures = failed == failed_samples.end() ? 0 : failed->second;
    if (g.results.empty() && failures == 0) continue;
    PassKRecord r{g.query.id, static_cast<int>(g.results.size()) + failures, 0};
    for (const auto& a : g.results) r.successes += a.answer_correct ? 1 : 0;
    passk.push_back(r);
  }
  const std::vector<std::string> retained = reject_sample_passk(passk, cs.passk);
  manifest.mark("curation");

  std::vector<Json> sft_rows, summary_rows, pair_rows;
  for (const auto& r : sft.records) sft_rows.push_back(to_json(r));
  for (const auto& r : summary.records) summary_rows.push_back(to_json(r));
  for (const auto& p : pairs.pairs) pair_rows.push_back(to_json(p));
  std::string retained_text;
  for (const auto& id : retained) retained_text += id + "\n";

  Json counts = Json::array();
  for (const auto& c : summary.counts) {
    counts.push_back({{"category", c.name},
                      {"requested", c.requested},
                      {"emitted", c.emitted},
                      {"candidates", c.candidates}});
  }
  const Json report = {{"sft_dropped", sft.dropped},
                       {"pair_skipped", pairs.skipped},
                       {"summary_counts", counts},
                       {"summary_notices", summary.notices},
                       {"passk_k", cs.passk.k},
                       {"passk_max_pass_rate", cs.passk.max_pass_rate}};

  manifest.counter("groups", static_cast<std::int64_t>(groups.size()));
  manifest.counter("sft_records", static_cast<std::int64_t>(sft.records.size()));
  manifest.counter("sft_dropped", static_cast<std::int64_t>(sft.dropped.size()));
  manifest.counter("summary_records", static_cast<std::int64_t>(summary.records.size()));
  manifest.counter("pairs", static_cast<std::int64_t>(pairs.pairs.size()));
  manifest.counter("pairs_skipped", static_cast<std::int64_t>(pairs.skipped.size()));
  manifest.counter("rl_retained", static_cast<std::int64_t>(retained.size()));

  const std::string pairs_file = "preference_pairs_round_" + std::to_string(cs.round) + ".jsonl";
  const auto plan = iterative_dpo_round_plan(cs.dpo_rounds, cs.model_tag);
  OutputSet outputs;
  outputs.add_jsonl(kReasoningSftFile, sft_rows);
  outputs.add_jsonl(kSummaryCorpusFile, summary_rows);
  outputs.add_jsonl(pairs_file, pair_rows);
  outputs.add(kRetainedIdsFile, retained_text);
  outputs.add_json(kDpoPlanFile, to_json(plan));
  outputs.add_json("curation_report.json", report);
  outputs.publish(ctx.out_dir, manifest);
  ctx.out << "curate: " << sft.records.size() << " sft records (" << sft.dropped.size()
          << " dropped), " << summary.records.size() << " summary records, "
          << pairs.pairs.size() << " pairs (round " << cs.round << "), " << retained.size()
          << " retained for RL\n";
  for (const auto& n : summary.notices) ctx.out << "  notice: " << n << "\n";
  return kExitOk;
}

Json reward_row(const Json& item, const RunConfig& cfg) {
  const auto id = item.value("id", std::string());
  const auto kind = item.at("reward").get<std::string>();
  const auto output = item.at("output").get<std::string>();
  const auto truth = item.at("ground_truth").get<std::string>();
  Json row;
  if (kind == "st_grpo") {
    const RewardTask task = reward_task_from_string(item.at("task").get<std::string>());
    const auto mode_name = item.value("format", std::string("full_trace"));
    FormatMode mode;
    if (mode_name == "full_trace") {
      mode = FormatMode::FullTrace;
    } else if (mode_name == "answer_envelope") {
      mode = FormatMode::AnswerEnvelope;
    } else {
      throw SchemaError("unknown format mode '" + mode_name + "'");
    }
    const auto answer = extract_answer(output, mode);
    const Prediction prediction =
        answer ? parse_prediction(task, *answer) : Prediction(std::monostate{});
    row = to_json(st_grpo_reward(task, output, prediction, truth, mode));
    row["task"] = to_string(task);
  } else if (kind == "j_grpo") {
    const int true_level = item.at("true_level").get<int>();
    const double fraction = item.at("step_fraction").get<double>();
    const CurriculumStage stage = curriculum_stage(fraction, cfg.reward.curriculum_switch);
    const auto judged = parse_judge_output(output);
    if (judged) {
      row = to_json(j_grpo_reward(judged->quality_level, true_level,
                                  exact_match_reward(judged->answer, truth), 1.0, stage,
                                  cfg.reward.graded_judge));
    } else {
      if (true_level < 1 || true_level > 5) throw RangeError("true_level must lie in 1..5");
      RewardBreakdown b;
      b.r_judge = 0.0;
      b.r_answer = 0.0;
      b.alpha = stage.alpha();
      b.note = "unparsable judge output";
      row = to_json(b);
    }
    row["stage"] = to_string(stage);
  } else {
    throw SchemaError("reward must be st_grpo or j_grpo");
  }
  row["id"] = id;
  row["reward"] = kind;
  return row;
}

int cmd_reward_eval(Context& ctx) {
  if (ctx.input.empty()) throw ConfigError("reward-eval needs --input <items.jsonl>");
  StageManifest manifest = make_manifest(ctx, "reward-eval");
  manifest.input(ctx.input);
  std::vector<Json> rows;
  for (const auto& line : read_jsonl(ctx.input)) {
    try {
      rows.push_back(reward_row(line.value, ctx.cfg));
    } catch (const Json::exception& e) {
      throw DataError(ctx.input.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(ctx.input.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    }
    manifest.add(rows.back()["reward"].get<std::string>() + "_items");
  }
  manifest.counter("items", static_cast<std::int64_t>(rows.size()));
  OutputSet outputs;
  outputs.add_jsonl(kRewardEvalFile, rows);
  outputs.publish(ctx.out_dir, manifest);
  ctx.out << "reward-eval: " << rows.size() << " items scored\n";
  return kExitOk;
}

int cmd_grpo_check(Context& ctx, bool write_outputs) {
  oracle::SuiteSettings settings;
  settings.seed = ctx.cfg.seed;
  settings.gradient_instances = ctx.cfg.oracle.gradient_instances;
  settings.advantage_groups = ctx.cfg.oracle.advantage_groups;
  settings.clip_samples = ctx.cfg.oracle.clip_samples;
  const auto lines = oracle::run_numeric_suite(settings);

  bool all_pass = true;
  Json doc = Json::array();
  for (const auto& l : lines) {
    ctx.out << (l.pass ? "PASS" : "FAIL") << "  " << l.name << ": " << l.detail << "\n";
    all_pass = all_pass && l.pass;
    doc.push_back({{"check", l.name}, {"pass", l.pass}, {"detail", l.detail}});
  }
  if (write_outputs) {
    StageManifest manifest = make_manifest(ctx, "grpo-check");
    manifest.counter("checks", static_cast<std::int64_t>(lines.size()));
    manifest.counter("failed", static_cast<std::int64_t>(
                                   std::count_if(lines.begin(), lines.end(),
                                                 [](const auto& l) { return !l.pass; })));
    OutputSet outputs;
    outputs.add_json(kGrpoCheckFile, doc);
    outputs.publish(ctx.out_dir, manifest);
  }
  if (!all_pass) throw OracleFailure("numeric oracle suite reported failures");
  return kExitOk;
}

int cmd_evolve(Context& ctx) {
  const fs::path dir = input_dir(ctx);
  const EvolveSettings& es = ctx.cfg.evolve;
  const ModelEndpoint reasoner = ctx.cfg.resolve(es.reasoner, EndpointRole::Reasoner);
  const ModelEndpoint summarizer = ctx.cfg.resolve(es.summarizer, EndpointRole::Summarizer);
  const ModelEndpoint judge = ctx.cfg.resolve(ctx.cfg.assessment.judge, EndpointRole::AnswerJudge);
  const ModelEndpoint scorer = ctx.cfg.resolve(ctx.cfg.assessment.scorer, EndpointRole::PathScorer);
  std::vector<GoldenExemplar> bank = read_exemplars(ctx.cfg);

  std::vector<Query> queries = read_queries(dir / kQueriesFile);
  require_video_exemplars(queries, bank);
  const auto by_id = index_queries(queries);
  std::sort(queries.begin(), queries.end(),
            [](const Query& a, const Query& b) { return a.id < b.id; });

  StageManifest manifest = make_manifest(ctx, "evolve");
  manifest.input(dir / kQueriesFile);
  if (!ctx.cfg.assessment.exemplars.empty()) manifest.input(ctx.cfg.assessment.exemplars);

  ModelGateway gateway(ctx.cfg.endpoints, ctx.transport, ctx.cfg.gateway);
  Evolver evolver(gateway, reasoner, summarizer, ctx.cfg.evolve_config());
  std::vector<EvolveSession> sessions(queries.size());
  parallel_for(queries.size(), ctx.cfg.parallelism,
               [&](std::size_t i) { sessions[i] = evolver.run_session(queries[i]); });
  manifest.mark("sessions");

  AssessmentConfig acfg = ctx.cfg.assessment_config();
  acfg.annotate_flaws = false;
  Assessor assessor(gateway, judge, scorer, std::nullopt, acfg, std::move(bank));
  const HarvestResult harvested =
      harvest(sessions, by_id, assessor, es.harvest_threshold, ctx.cfg.parallelism);
  manifest.mark("harvest");

  const auto plan = evolve_cycle_plan(es.cycles, es.reasoner_tag, es.summarizer_tag);
  const CycleManifest& cycle = plan[static_cast<std::size_t>(es.cycle - 1)];

  std::vector<Json> session_rows, sft_rows, enrichment_rows;
  for (const char* name : {"satisfactory", "max_iterations", "failed", "harvested", "iterations"}) {
    manifest.counter(name, 0);
  }
  for (const auto& s : sessions) {
    session_rows.push_back(to_json(s));
    manifest.add(std::string(to_string(s.terminal_reason)));
    manifest.add("iterations", static_cast<std::int64_t>(s.iterations.size()));
    if (s.harvested) manifest.add("harvested");
  }
  for (const auto& r : harvested.reasoner_sft) sft_rows.push_back(to_json(r));
  for (const auto& r : harvested.summary_enrichment) enrichment_rows.push_back(to_json(r));
  manifest.counter("sessions", static_cast<std::int64_t>(sessions.size()));
  manifest.counter("reasoner_sft", static_cast<std::int64_t>(sft_rows.size()));
  manifest.counter("summary_enrichment", static_cast<std::int64_t>(enrichment_rows.size()));
  manifest.counter("cycle", es.cycle);

  OutputSet outputs;
  outputs.add_jsonl(cycle.sessions_file, session_rows);
  outputs.add_jsonl(cycle.reasoner_sft_file, sft_rows);
  outputs.add_jsonl(cycle.summary_enrichment_file, enrichment_rows);
  outputs.add_json(kCyclePlanFile, to_json(plan));
  outputs.publish(ctx.out_dir, manifest);
  ctx.out << "evolve: cycle " << es.cycle << ", " << sessions.size() << " sessions ("
          << manifest.get("satisfactory") << " satisfactory, " << manifest.get("max_iterations")
          << " at the iteration cap, " << manifest.get("failed") << " failed), "
          << sft_rows.size() << " harvested, " << enrichment_rows.size()
          << " enrichment records\n";
  return kExitOk;
}

int cmd_report(Context& ctx) {
  const fs::path dir = input_dir(ctx);
  if (!fs::is_directory(dir)) throw DataError("report input " + dir.string() + " is not a directory");
  StageManifest manifest = make_manifest(ctx, "report");
  Json report = Json::object();

  const fs::path traces_path = dir / kTracesFile;
  std::size_t trace_count = 0;
  if (fs::exists(traces_path)) {
    trace_count = read_traces(traces_path).size();
    report["traces"] = trace_count;
    manifest.input(traces_path);
  }

  const fs::path assess_path = dir / kAssessmentsFile;
  if (fs::exists(assess_path)) {
    manifest.input(assess_path);
    std::map<std::string, std::size_t> histogram;
    std::array<std::size_t, 5> levels{};
    std::size_t total = 0;
    for (const auto& r : read_assessments(assess_path)) {
      ++total;
      if (r.scored()) {
        const int lo = (*r.path_score - 1) / 10 * 10 + 1;
        char bucket[32];
        std::snprintf(bucket, sizeof bucket, "%03d-%03d", lo, lo + 9);
        ++histogram[bucket];
        ++levels[static_cast<std::size_t>(*r.quality_level - 1)];
      } else if (r.error) {
        ++histogram["error"];
      } else if (!r.answer_correct) {
        ++histogram["filtered"];
      } else {
        ++histogram["unscored"];
      }
    }
    report["assessments"] = total;
    report["score_histogram"] = histogram;
    report["quality_levels"] = levels;
    ctx.out << "assessments: " << total << " (traces: " << trace_count << ")\n";
    ctx.out << "score histogram:\n";
    for (const auto& [bucket, n] : histogram) ctx.out << "  " << bucket << "  " << n << "\n";
    ctx.out << "quality levels:";
    for (std::size_t l = 0; l < levels.size(); ++l) ctx.out << "  L" << l + 1 << "=" << levels[l];
    ctx.out << "\n";
  }

  Json pair_counts = Json::object();
  Json session_reasons = Json::object();
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("preference_pairs_round_", 0) == 0 && entry.path().extension() == ".jsonl") {
      pair_counts[name] = read_jsonl(entry.path()).size();
      manifest.input(entry.path());
    } else if (name.rfind("sessions_cycle_", 0) == 0 && entry.path().extension() == ".jsonl") {
      std::map<std::string, std::size_t> reasons;
      for (const auto& line : read_jsonl(entry.path())) {
        try {
          ++reasons[std::string(to_string(session_from_json(line.value).terminal_reason))];
        } catch (const Error& e) {
          throw DataError(entry.path().string() + ":" + std::to_string(line.line_number) + ": " +
                          e.what());
        }
      }
      session_reasons[name] = reasons;
      manifest.input(entry.path());
    }
  }
  report["preference_pairs"] = pair_counts;
  report["session_terminal_reasons"] = session_reasons;
  for (const auto& [file, n] : pair_counts.items()) ctx.out << file << ": " << n << " pairs\n";
  for (const auto& [file, reasons] : session_reasons.items()) {
    ctx.out << file << ":";
    for (const auto& [reason, n] : reasons.items()) ctx.out << "  " << reason << "=" << n;
    ctx.out << "\n";
  }

  OutputSet outputs;
  outputs.add_json("report.json", report);
  outputs.publish(ctx.out_dir, manifest);
  return kExitOk;
}

std::shared_ptr<Transport> make_transport(const CommandOptions& o) {
  if (o.transport) return o.transport;
  if (!o.mock_script.empty()) {
    return std::make_shared<MockTransport>(MockScript::from_jsonl(o.mock_script));
  }
  return std::make_shared<HttpTransport>();
}

void print_error(std::ostream& err, const std::string& command, const char* kind,
                 const std::string& message) {
  err << Json{{"command", command}, {"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_command(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const bool standalone_check = o.command == "grpo-check" && o.config.empty();
    RunConfig cfg;
    if (standalone_check) {
      cfg.seed = o.seed_override.value_or(7);
      cfg.source = Json{{"seed", cfg.seed}};
    } else {
      if (o.config.empty()) throw ConfigError("--config is required");
      cfg = RunConfig::load(o.config, o.seed_override);
    }
    if (o.parallelism) {
      if (*o.parallelism < 1) throw ConfigError("--parallelism must be >= 1");
      cfg.parallelism = *o.parallelism;
    }
    fs::path out_dir = o.output.empty() ? cfg.work_dir : o.output;
    Context ctx{std::move(cfg), o.input, std::move(out_dir), nullptr, out};

    if (o.command == "grpo-check") return cmd_grpo_check(ctx, !standalone_check || !o.output.empty());
    if (o.command == "reward-eval") return cmd_reward_eval(ctx);
    if (o.command == "curate") return cmd_curate(ctx);
    if (o.command == "report") return cmd_report(ctx);

    ctx.transport = make_transport(o);
    if (o.command == "generate") return cmd_generate(ctx);
    if (o.command == "assess") return cmd_assess(ctx);
    if (o.command == "evolve") return cmd_evolve(ctx);
    throw ConfigError("unknown command '" + o.command + "'");
  } catch (const ConfigError& e) {
    print_error(err, o.command, "config", e.what());
    return kExitConfig;
  } catch (const OracleFailure& e) {
    print_error(err, o.command, "oracle", e.what());
    return kExitOracle;
  } catch (const std::exception& e) {
    print_error(err, o.command, "data", e.what());
    return kExitData;
  }
}

}  // namespace tandem::pipeline
