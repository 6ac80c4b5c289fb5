#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tandem/error.hpp"
#include "tandem/evolve.hpp"

using namespace tandem;
using namespace tandem::testing;

namespace {

struct Harness {
  explicit Harness(std::vector<Json> entries, EvolveConfig cfg = {})
      : mock(make_mock(entries)),
        gateway({endpoint("reasoner", EndpointRole::Reasoner),
                 endpoint("summarizer", EndpointRole::Summarizer),
                 endpoint("judge", EndpointRole::AnswerJudge),
                 endpoint("scorer", EndpointRole::PathScorer)},
                mock, fast_options()),
        evolver(gateway, gateway.endpoint("reasoner"), gateway.endpoint("summarizer"),
                std::move(cfg)) {}
  std::shared_ptr<MockTransport> mock;
  ModelGateway gateway;
  Evolver evolver;
};

/// Reasoner replies tagged r1, r2, r3 by iteration; summarizer verdicts keyed
/// on those tags.
std::vector<Json> scripted(bool sat1, bool sat2, bool sat3) {
  return {
      mock_entry("reasoner", {"Your reasoning from iteration 2:"}, {trace_reply(2, "A", "r3")}),
      mock_entry("reasoner", {"Your reasoning from iteration 1:"}, {trace_reply(2, "B", "r2")}),
      mock_entry("reasoner", {"You are the reasoning agent"}, {trace_reply(2, "C", "r1")}),
      mock_entry("summarizer", {"\"r1 1\""}, {verdict_reply(sat1, "check the left side")}),
      mock_entry("summarizer", {"\"r2 1\""}, {verdict_reply(sat2, "recount the objects")}),
      mock_entry("summarizer", {"\"r3 1\""}, {verdict_reply(sat3, "fine")}),
  };
}

}  // namespace

TEST(Evolve, VerdictParsing) {
  const auto v = parse_verdict(verdict_reply(false, "fix step 2", "B"));
  EXPECT_FALSE(v.satisfactory);
  EXPECT_EQ(v.feedback, "fix step 2");
  EXPECT_EQ(v.answer, "B");
  EXPECT_EQ(parse_verdict(to_json(v).dump()), v);
  EXPECT_NO_THROW(parse_verdict(verdict_reply(true, "")));
  EXPECT_ANY_THROW(parse_verdict(verdict_reply(false, "")));
  EXPECT_ANY_THROW(parse_verdict("{\"satisfactory\": true}"));
  EXPECT_ANY_THROW(parse_verdict("looks good"));
}

TEST(Evolve, SatisfiedOnFirstIteration) {
  Harness h(scripted(true, true, true));
  const auto s = h.evolver.run_session(make_query("q"));
  EXPECT_EQ(s.iterations.size(), 1u);
  EXPECT_EQ(s.terminal_reason, TerminalReason::Satisfactory);
  EXPECT_EQ(h.mock->total_calls(), 2u);
}

TEST(Evolve, SatisfiedOnSecondIteration) {
  Harness h(scripted(false, true, true));
  const auto s = h.evolver.run_session(make_query("q"));
  ASSERT_EQ(s.iterations.size(), 2u);
  EXPECT_EQ(s.terminal_reason, TerminalReason::Satisfactory);
  EXPECT_EQ(s.iterations[1].trace.final_answer, "B");

  // The second reasoner call sees the first trace and the feedback.
  const auto calls = h.mock->captured();
  ASSERT_EQ(calls.size(), 4u);
  const std::string& prompt = calls[2].prompt;
  EXPECT_NE(prompt.find(serialize_trace(s.iterations[0].trace)), std::string::npos);
  EXPECT_NE(prompt.find("Reviewer feedback:\ncheck the left side"), std::string::npos);
  EXPECT_EQ(calls[0].prompt.find("Reviewer feedback:"), std::string::npos);
}

TEST(Evolve, StopsAtMaxIterations) {
  Harness h(scripted(false, false, false));
  const auto s = h.evolver.run_session(make_query("q"));
  EXPECT_EQ(s.iterations.size(), 3u);
  EXPECT_EQ(s.terminal_reason, TerminalReason::MaxIterations);
  EXPECT_EQ(h.mock->total_calls(), 6u);
}

TEST(Evolve, FailureEndsSession) {
  Harness h(std::vector<Json>{mock_entry("reasoner", {}, {"nonsense", "still nonsense"})});
  const auto s = h.evolver.run_session(make_query("q"));
  EXPECT_EQ(s.terminal_reason, TerminalReason::Failed);
  EXPECT_TRUE(s.failure.has_value());
  EXPECT_TRUE(s.iterations.empty());
}

TEST(Evolve, IterationPreconditions) {
  Harness h(scripted(true, true, true));
  const ReasoningTrace t = make_trace("q", 2);
  EXPECT_THROW(h.evolver.run_iteration(make_query("q"), &t, nullptr, 2), PreconditionError);
  EXPECT_THROW(h.evolver.run_iteration(make_query("q"), nullptr, nullptr, 2), PreconditionError);
}

TEST(Evolve, SessionJsonRoundTrip) {
  Harness h(scripted(false, true, true));
  const auto s = h.evolver.run_session(make_query("q"));
  const auto back = session_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Evolve, ConfigValidation) {
  EvolveConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_iterations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EvolveConfig{};
  c.harvest_threshold = 101;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Evolve, HarvestKeepsCorrectHighScoringFinals) {
  auto entries = scripted(false, true, true);
  // Iteration 1 answers C, the revision answers B; ground truth is B.
  entries.push_back(mock_entry("judge", {"Generated answer: B\n"}, {"yes"}));
  entries.push_back(mock_entry("judge", {}, {"no"}));
  entries.push_back(mock_entry("scorer", {"grading 1 reasoning paths"}, {scores_reply({88})}));
  Harness h(entries);

  const Query q = make_query("q", "Which one?", "B");
  std::vector<EvolveSession> sessions = {h.evolver.run_session(q)};
  const std::map<std::string, Query, std::less<>> queries = {{"q", q}};
  AssessmentConfig acfg;
  Assessor assessor(h.gateway, h.gateway.endpoint("judge"), h.gateway.endpoint("scorer"),
                    std::nullopt, acfg);

  const auto result = harvest(sessions, queries, assessor, 70);
  ASSERT_EQ(result.reasoner_sft.size(), 1u);
  EXPECT_EQ(result.reasoner_sft[0].path_score, 88);
  EXPECT_EQ(result.reasoner_sft[0].trace.final_answer, "B");
  EXPECT_TRUE(sessions[0].harvested);
  ASSERT_EQ(result.summary_enrichment.size(), 2u);
  EXPECT_FALSE(result.summary_enrichment[0].answer_correct);
  EXPECT_TRUE(result.summary_enrichment[1].answer_correct);
  EXPECT_EQ(result.summary_enrichment[1].iteration, 2);

  // Same session under a stricter threshold is not harvested.
  const auto strict = harvest(sessions, queries, assessor, 90);
  EXPECT_TRUE(strict.reasoner_sft.empty());
  EXPECT_FALSE(sessions[0].harvested);
}

TEST(Evolve, CyclePlan) {
  const auto plan = evolve_cycle_plan(2);
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_EQ(plan[0].reasoner_in, "reasoner_1");
  EXPECT_EQ(plan[0].summarizer_out, "summarizer_2");
  EXPECT_EQ(plan[1].reasoner_in, plan[0].reasoner_out);
  EXPECT_EQ(plan[1].sessions_file, "sessions_cycle_2.jsonl");
  EXPECT_TRUE(cycle_plan_is_chained(plan));
  EXPECT_EQ(cycle_plan_from_json(to_json(plan)), plan);
  EXPECT_THROW(evolve_cycle_plan(0), ConfigError);
}
