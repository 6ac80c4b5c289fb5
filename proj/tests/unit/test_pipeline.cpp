#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "tandem/digest.hpp"
#include "tandem/error.hpp"
#include "tandem/pipeline/commands.hpp"
#include "tandem/pipeline/config.hpp"
#include "tandem/pipeline/manifest.hpp"

using namespace tandem;
using namespace tandem::pipeline;
using namespace tandem::testing;
namespace fs = std::filesystem;

namespace {

Json base_config() {
  return {{"seed", 5},
          {"parallelism", 2},
          {"endpoints",
           {{{"name", "gen"}, {"role", "generator"}},
            {{"name", "judge"}, {"role", "answer_judge"}},
            {{"name", "scorer"}, {"role", "path_scorer"}},
            {{"name", "reasoner"}, {"role", "reasoner"}},
            {{"name", "summarizer"}, {"role", "summarizer"}}}},
          {"gateway", {{"backoff_base_ms", 0}, {"backoff_cap_ms", 0}}},
          {"generation", {{"n_samples", 2}, {"max_steps", 4}}},
          {"curation", {{"passk", {{"k", 2}}}}}};
}

std::vector<Json> pipeline_script() {
  return {mock_entry("gen", {"Write reasoning step"}, {step_reply("summary")}),
          mock_entry("gen", {"Complete reasoning"}, {final_reply("A")}),
          mock_entry("judge", {}, {"yes"}),
          mock_entry("scorer", {"grading 2 reasoning paths"}, {scores_reply({80, 40})})};
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

struct Workspace {
  fs::path dir = temp_dir("pipeline");
  fs::path config = dir / "config.json";
  fs::path work = dir / "work";

  explicit Workspace(const Json& cfg = base_config()) {
    write_file(config, cfg.dump(2));
    fs::create_directories(work);
    std::string corpus;
    for (const char* id : {"q1", "q2"}) corpus += to_json(make_query(id)).dump() + "\n";
    write_file(dir / "corpus.jsonl", corpus);
  }

  CliRun run(const std::string& command, fs::path input = {},
          std::shared_ptr<Transport> transport = nullptr) const {
    CommandOptions o;
    o.command = command;
    o.config = config;
    o.input = std::move(input);
    o.output = work;
    o.transport = transport ? transport : make_mock(pipeline_script());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_command(o, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  Json manifest(const std::string& stage) const {
    return Json::parse(read_file(work / (stage + ".manifest.json")));
  }
};

}  // namespace

TEST(PipelineConfig, RejectsUnknownKeys) {
  Json doc = base_config();
  doc["generation"]["n_sample"] = 3;
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  doc = base_config();
  doc.erase("seed");
  EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
  doc = base_config();
  doc["endpoints"][0]["role"] = "oracle";
  EXPECT_ANY_THROW(RunConfig::from_json(doc));
}

TEST(PipelineConfig, ResolvesEndpointsByRole) {
  const auto cfg = RunConfig::from_json(base_config());
  EXPECT_EQ(cfg.resolve("", EndpointRole::PathScorer).name, "scorer");
  EXPECT_THROW(cfg.resolve("gen", EndpointRole::AnswerJudge), ConfigError);
  EXPECT_THROW(cfg.resolve("nope", EndpointRole::Generator), ConfigError);
  EXPECT_EQ(cfg.gen_loop().param_schedule.size(), 2u);
}

TEST(PipelineConfig, SeedOverrideChangesHash) {
  Workspace ws;
  const auto a = RunConfig::load(ws.config);
  const auto b = RunConfig::load(ws.config, 99);
  EXPECT_EQ(b.seed, 99u);
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), RunConfig::load(ws.config).hash());
}

TEST(Pipeline, GenerateWritesTracesAndManifest) {
  Workspace ws;
  const CliRun r = ws.run("generate", ws.dir / "corpus.jsonl");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json m = ws.manifest("generate");
  EXPECT_EQ(m["counters"]["queries"], 2);
  EXPECT_EQ(m["counters"]["traces"], 4);
  EXPECT_EQ(m["counters"]["failed_samples"], 0);
  EXPECT_TRUE(m["outputs"].contains(kTracesFile));
  EXPECT_EQ(read_jsonl(ws.work / kTracesFile).size(), 4u);
}

TEST(Pipeline, GenerateIsDeterministic) {
  Workspace ws;
  ASSERT_EQ(ws.run("generate", ws.dir / "corpus.jsonl").code, kExitOk);
  const Json first = strip_volatile(ws.manifest("generate"));
  const std::string traces = read_file(ws.work / kTracesFile);
  ASSERT_EQ(ws.run("generate", ws.dir / "corpus.jsonl").code, kExitOk);
  EXPECT_EQ(strip_volatile(ws.manifest("generate")), first);
  EXPECT_EQ(read_file(ws.work / kTracesFile), traces);
}

TEST(Pipeline, MissingGeneratorIsConfigError) {
  Json cfg = base_config();
  cfg["endpoints"].erase(0);
  Workspace ws(cfg);
  const CliRun r = ws.run("generate", ws.dir / "corpus.jsonl");
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_FALSE(fs::exists(ws.work / kTracesFile));
  const Json e = Json::parse(r.err);
  EXPECT_EQ(e["command"], "generate");
  EXPECT_EQ(e["error"], "config");
}

TEST(Pipeline, MalformedCorpusIsDataError) {
  Workspace ws;
  write_file(ws.dir / "bad.jsonl", to_json(make_query("q1")).dump() + "\n{oops\n");
  const CliRun r = ws.run("generate", ws.dir / "bad.jsonl");
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("bad.jsonl:2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(ws.work / "generate.manifest.json"));
}

TEST(Pipeline, MockScriptFromFile) {
  Workspace ws;
  write_file(ws.dir / "mock.jsonl", to_jsonl([] {
               auto rows = pipeline_script();
               rows.insert(rows.begin(), Json{{"exhaustion", "repeat_last"}});
               return rows;
             }()));
  CommandOptions o;
  o.command = "generate";
  o.config = ws.config;
  o.input = ws.dir / "corpus.jsonl";
  o.output = ws.work;
  o.mock_script = ws.dir / "mock.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(run_command(o, out, err), kExitOk) << err.str();
}

TEST(Pipeline, FullRunThroughReport) {
  Workspace ws;
  ASSERT_EQ(ws.run("generate", ws.dir / "corpus.jsonl").code, kExitOk);
  const CliRun a = ws.run("assess", ws.work);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const Json am = ws.manifest("assess");
  EXPECT_EQ(am["counters"]["groups"], 2);
  EXPECT_EQ(am["counters"]["scorer_calls"], 2);
  EXPECT_EQ(am["counters"]["scored"], 4);

  const CliRun c = ws.run("curate", ws.work);
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_EQ(read_jsonl(ws.work / kReasoningSftFile).size(), 2u);
  EXPECT_EQ(read_jsonl(ws.work / "preference_pairs_round_1.jsonl").size(), 2u);
  EXPECT_TRUE(fs::exists(ws.work / kDpoPlanFile));

  const CliRun rep = ws.run("report", ws.work);
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  const Json report = Json::parse(read_file(ws.work / "report.json"));
  std::size_t sum = 0;
  for (const auto& [bucket, n] : report["score_histogram"].items()) sum += n.get<std::size_t>();
  EXPECT_EQ(sum, report["assessments"].get<std::size_t>());
  EXPECT_EQ(report["traces"], 4);
  EXPECT_EQ(report["score_histogram"]["071-080"], 2);
  EXPECT_NE(rep.out.find("score histogram"), std::string::npos);
}

TEST(Pipeline, CurateWithoutGroupsIsDataError) {
  Workspace ws;
  write_file(ws.work / kQueriesFile, read_file(ws.dir / "corpus.jsonl"));
  write_file(ws.work / kTracesFile, "");
  write_file(ws.work / kAssessmentsFile, "");
  const CliRun r = ws.run("curate", ws.work);
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("no assessed groups"), std::string::npos);
}

TEST(Pipeline, RewardEval) {
  Workspace ws;
  const std::string trace = serialize_trace(make_trace("q", 2, "B"));
  std::vector<Json> items = {
      {{"id", "a"}, {"reward", "st_grpo"}, {"task", "exact_match"}, {"output", trace},
       {"ground_truth", "B"}},
      {{"id", "b"}, {"reward", "st_grpo"}, {"task", "exact_match"}, {"output", "<answer>C</answer>"},
       {"ground_truth", "B"}, {"format", "answer_envelope"}},
      {{"id", "c"}, {"reward", "j_grpo"}, {"output", R"({"quality_level": 2, "answer": "x"})"},
       {"true_level", 2}, {"ground_truth", "y"}, {"step_fraction", 0.75}},
  };
  write_file(ws.dir / "items.jsonl", to_jsonl(items));
  const CliRun r = ws.run("reward-eval", ws.dir / "items.jsonl");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = read_jsonl(ws.work / kRewardEvalFile);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0].value["total"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(rows[1].value["total"].get<double>(), 0.1);
  EXPECT_NEAR(rows[2].value["total"].get<double>(), 0.37, 1e-12);
  EXPECT_EQ(ws.manifest("reward-eval")["counters"]["st_grpo_items"], 2);

  write_file(ws.dir / "bad.jsonl", R"({"reward": "ppo", "output": "", "ground_truth": ""})" "\n");
  EXPECT_EQ(ws.run("reward-eval", ws.dir / "bad.jsonl").code, kExitData);
}

TEST(Pipeline, UnknownCommand) {
  Workspace ws;
  EXPECT_EQ(ws.run("train").code, kExitConfig);
}

TEST(Manifest, StripVolatileDropsTimings) {
  StageManifest m("x", "abc", 1);
  m.counter("n", 3);
  m.mark("done");
  const Json doc = m.to_json({{"f", "123"}});
  EXPECT_TRUE(doc.contains("timings_ms"));
  const Json s = strip_volatile(doc);
  EXPECT_FALSE(s.contains("timings_ms"));
  EXPECT_EQ(s["counters"]["n"], 3);
}

TEST(Manifest, PublishWritesFilesThenManifest) {
  const fs::path dir = temp_dir("publish");
  StageManifest m("demo", "h", 2);
  OutputSet out;
  out.add("a.txt", "hello\n");
  out.add_jsonl("b.jsonl", {Json{{"k", 1}}});
  const fs::path mp = out.publish(dir, m);
  EXPECT_EQ(mp.filename(), "demo.manifest.json");
  EXPECT_EQ(read_file(dir / "a.txt"), "hello\n");
  const Json doc = Json::parse(read_file(mp));
  EXPECT_EQ(doc["outputs"]["a.txt"], sha256_hex("hello\n"));
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos);
  }
}
