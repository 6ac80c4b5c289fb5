#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fixtures.hpp"
#include "tandem/curation.hpp"
#include "tandem/error.hpp"
#include "tandem/rng.hpp"

using namespace tandem;
using namespace tandem::testing;

namespace {

AssessmentResult scored(const std::string& q, int sample, int score) {
  return {q, sample, true, score, quality_level(score), std::nullopt, std::nullopt};
}

AssessmentResult filtered(const std::string& q, int sample) {
  return {q, sample, false, std::nullopt, std::nullopt, std::nullopt, std::nullopt};
}

/// Group whose traces carry the given scores (0 = answer incorrect) and steps.
AssessedGroup group(const std::string& id, const std::vector<int>& scores,
                    std::vector<int> steps = {}) {
  AssessedGroup g;
  g.query = make_query(id);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int s = static_cast<int>(i);
    g.traces.push_back(make_trace(id, steps.empty() ? 2 : steps[i], scores[i] ? "A" : "B", s));
    g.results.push_back(scores[i] ? scored(id, s, scores[i]) : filtered(id, s));
  }
  return g;
}

SummaryCorpusSpec example_spec(std::size_t total) {
  SummaryCorpusSpec spec;
  spec.strata = {{1, 40, 0.2}, {41, 80, 0.2}};
  spec.optimal_fraction = 0.3;
  spec.agent_pair_fraction = 0.1;
  spec.plain_qa_fraction = 0.2;
  spec.total = total;
  return spec;
}

/// 20 groups with flawed scores in both strata and agent-produced traces.
std::vector<AssessedGroup> rich_groups(bool low_stratum = true) {
  std::vector<AssessedGroup> out;
  for (int q = 0; q < 20; ++q) {
    auto g = group("q" + std::to_string(100 + q),
                   {95, 70, low_stratum ? 30 : 60, 0, low_stratum ? 12 : 45});
    g.traces[1].source = TraceSource::AgentReasoner;
    g.traces[2].source = TraceSource::EvolveRefined;
    out.push_back(std::move(g));
  }
  return out;
}

std::size_t emitted(const SummaryCorpus& c, const std::string& name) {
  for (const auto& k : c.counts) {
    if (k.name == name) return k.emitted;
  }
  return 0;
}

}  // namespace

TEST(Curation, BestPathArgmax) {
  const auto g = group("q", {90, 55, 70});
  EXPECT_EQ(select_best_path(g.results, g.traces).sample_index, 0);
}

TEST(Curation, BestPathTieBreaksOnSteps) {
  const auto g = group("q", {80, 80}, {5, 3});
  EXPECT_EQ(select_best_path(g.results, g.traces).steps.size(), 3u);
  const auto h = group("q", {80, 80}, {3, 3});
  EXPECT_EQ(select_best_path(h.results, h.traces).sample_index, 0);
}

TEST(Curation, BestPathNoSurvivor) {
  const auto g = group("q", {0, 0});
  EXPECT_THROW(select_best_path(g.results, g.traces), NoSurvivor);
}

TEST(Curation, BestPathIsOrderInvariant) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(7);
    std::vector<int> scores, steps;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(rng.uniform_index(4) == 0 ? 0 : 60 + static_cast<int>(rng.uniform_index(5)));
      steps.push_back(1 + static_cast<int>(rng.uniform_index(3)));
    }
    if (std::all_of(scores.begin(), scores.end(), [](int s) { return s == 0; })) scores[0] = 61;
    const auto g = group("q", scores, steps);
    const ReasoningTrace expected = select_best_path(g.results, g.traces);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<AssessmentResult> results;
    std::vector<ReasoningTrace> traces;
    for (std::size_t i : perm) {
      results.push_back(g.results[i]);
      traces.push_back(g.traces[i]);
    }
    ASSERT_EQ(select_best_path(results, traces), expected) << "trial " << trial;
  }
}

TEST(Curation, JoinSortsAndValidates) {
  std::vector<Query> queries = {make_query("b"), make_query("a")};
  std::vector<ReasoningTrace> traces = {make_trace("a", 1, "A", 1), make_trace("a", 1, "A", 0)};
  std::vector<AssessmentResult> results = {scored("a", 0, 50), scored("a", 1, 60)};
  const auto groups = join_assessments(queries, traces, results);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].query.id, "a");
  EXPECT_EQ(groups[0].traces[0].sample_index, 0);
  EXPECT_EQ(groups[0].results[0].path_score, 50);
  EXPECT_TRUE(groups[1].traces.empty());

  results.push_back(scored("a", 7, 10));
  EXPECT_THROW(join_assessments(queries, traces, results), DataError);
  results.pop_back();
  results.push_back(scored("a", 0, 10));
  EXPECT_THROW(join_assessments(queries, traces, results), DataError);
}

TEST(Curation, ReasoningSftDropsGroupsWithoutSurvivors) {
  std::vector<AssessedGroup> groups = {group("a", {40, 90}), group("b", {0, 0})};
  const auto sft = build_reasoning_sft(groups);
  ASSERT_EQ(sft.records.size(), 1u);
  EXPECT_EQ(sft.records[0].path_score, 90);
  EXPECT_EQ(sft.dropped, (std::vector<std::string>{"b"}));
}

TEST(Curation, ApportionSumsExactly) {
  const std::vector<double> w = {0.2, 0.2, 0.3, 0.1, 0.2};
  EXPECT_EQ(apportion(100, w), (std::vector<std::size_t>{20, 20, 30, 10, 20}));
  const std::vector<double> thirds = {1.0, 1.0, 1.0};
  const auto t = apportion(10, thirds);
  EXPECT_EQ(t[0] + t[1] + t[2], 10u);
  EXPECT_EQ(t[0], 4u);
  const std::vector<double> defaults = {0.15, 0.15, 0.15, 0.30, 0.10, 0.15};
  EXPECT_EQ(apportion(100, defaults), (std::vector<std::size_t>{15, 15, 15, 30, 10, 15}));
  EXPECT_EQ(apportion(0, defaults), (std::vector<std::size_t>(6, 0)));
}

TEST(Curation, SummaryCorpusCountsMatchFractions) {
  const auto groups = rich_groups();
  const SummaryCorpusSpec spec = example_spec(100);
  const SummaryCorpus c = build_summary_corpus(groups, spec, 5);
  EXPECT_EQ(c.records.size(), 100u);
  EXPECT_EQ(emitted(c, "flawed_1_40"), 20u);
  EXPECT_EQ(emitted(c, "flawed_41_80"), 20u);
  EXPECT_EQ(emitted(c, "optimal"), 30u);
  EXPECT_EQ(emitted(c, "agent_pair"), 10u);
  EXPECT_EQ(emitted(c, "plain_qa"), 20u);
  EXPECT_TRUE(c.notices.empty());
  for (const auto& r : c.records) {
    if (r.kind == SummaryRecordKind::Flawed) {
      const auto& s = spec.strata[*r.stratum];
      EXPECT_GE(*r.path_score, s.lo);
      EXPECT_LE(*r.path_score, s.hi);
    }
    if (r.kind == SummaryRecordKind::PlainQa) EXPECT_FALSE(r.reasoning.has_value());
  }
}

TEST(Curation, EmptyStratumIsReallocatedToOtherStrata) {
  const auto groups = rich_groups(false);
  const SummaryCorpus c = build_summary_corpus(groups, example_spec(100), 5);
  EXPECT_EQ(emitted(c, "flawed_1_40"), 0u);
  EXPECT_EQ(emitted(c, "flawed_41_80"), 40u);
  EXPECT_EQ(emitted(c, "optimal"), 30u);
  EXPECT_EQ(c.records.size(), 100u);
  ASSERT_EQ(c.notices.size(), 1u);
  EXPECT_EQ(c.notices[0].rfind("InsufficientStratum", 0), 0u);
}

TEST(Curation, SummaryCorpusIsDeterministic) {
  const auto groups = rich_groups();
  const auto a = build_summary_corpus(groups, example_spec(60), 17);
  const auto b = build_summary_corpus(groups, example_spec(60), 17);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(to_json(a.records[i]).dump(), to_json(b.records[i]).dump());
  }
  const auto other = build_summary_corpus(groups, example_spec(60), 18);
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    differs = differs || to_json(a.records[i]).dump() != to_json(other.records[i]).dump();
  }
  EXPECT_TRUE(differs);
}

TEST(Curation, SpecValidation) {
  auto spec = example_spec(10);
  spec.plain_qa_fraction = 0.3;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = example_spec(10);
  spec.strata[1].lo = 30;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = example_spec(10);
  spec.strata[1].hi = 101;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_NO_THROW(SummaryCorpusSpec::defaults().validate());
}

TEST(Curation, PairsUseGapThenIncorrectFallback) {
  std::vector<AssessedGroup> groups = {group("a", {92, 40}), group("b", {90, 0}),
                                       group("c", {90}), group("d", {90, 80, 0}),
                                       group("e", {90, 80})};
  const auto out = build_preference_pairs(groups, 2);
  ASSERT_EQ(out.pairs.size(), 3u);
  EXPECT_EQ(out.pairs[0].chosen_score, 92);
  EXPECT_EQ(out.pairs[0].rejected_score, 40);
  EXPECT_EQ(out.pairs[1].query_id, "b");
  EXPECT_FALSE(out.pairs[1].rejected_score.has_value());
  EXPECT_EQ(out.pairs[2].query_id, "d");
  EXPECT_EQ(out.pairs[2].rejected.sample_index, 2);
  EXPECT_EQ(out.pairs[0].round, 2);
  EXPECT_EQ(out.skipped.size(), 2u);  // c: no rejected candidate, e: gap too small
}

TEST(Curation, PairsAlwaysDominanceOrdered) {
  Rng rng(77);
  std::vector<AssessedGroup> groups;
  for (int q = 0; q < 300; ++q) {
    std::vector<int> scores;
    const std::size_t n = 1 + rng.uniform_index(8);
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(rng.uniform_index(3) == 0 ? 0 : 1 + static_cast<int>(rng.uniform_index(100)));
    }
    groups.push_back(group("q" + std::to_string(q), scores));
  }
  const auto out = build_preference_pairs(groups, 1);
  EXPECT_EQ(out.pairs.size() + out.skipped.size(), groups.size());
  for (const auto& p : out.pairs) {
    EXPECT_EQ(p.chosen.query_id, p.rejected.query_id);
    EXPECT_NE(p.chosen, p.rejected);
    if (p.rejected_score) {
      EXPECT_GE(p.chosen_score - *p.rejected_score, 20);
    } else {
      EXPECT_EQ(p.rejected.final_answer, "B");  // incorrect trace
    }
  }
}

TEST(Curation, SubsamplePreservesOrder) {
  std::vector<AssessedGroup> groups;
  for (int q = 0; q < 30; ++q) groups.push_back(group("q" + std::to_string(10 + q), {90, 10}));
  const auto pairs = build_preference_pairs(groups, 1).pairs;
  const auto sub = subsample_pairs(pairs, 7, 3);
  ASSERT_EQ(sub.size(), 7u);
  EXPECT_TRUE(std::is_sorted(sub.begin(), sub.end(), [](const auto& a, const auto& b) {
    return a.query_id < b.query_id;
  }));
  EXPECT_EQ(subsample_pairs(pairs, 100, 3).size(), 30u);
  const auto again = subsample_pairs(pairs, 7, 3);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(sub[i].query_id, again[i].query_id);
}

TEST(Curation, PassKBoundaries) {
  PassKPolicy policy;  // k = 8, max 0.75, retain zero
  std::vector<PassKRecord> records = {{"all", 8, 8}, {"three", 8, 3}, {"six", 8, 6},
                                      {"seven", 8, 7}, {"zero", 8, 0}};
  EXPECT_EQ(reject_sample_passk(records, policy),
            (std::vector<std::string>{"three", "six", "zero"}));
  policy.retain_zero = false;
  EXPECT_EQ(reject_sample_passk(records, policy), (std::vector<std::string>{"three", "six"}));
  records.push_back({"short", 4, 1});
  EXPECT_THROW(reject_sample_passk(records, policy), KMismatch);
}

TEST(Curation, PassKRecordParsing) {
  const auto r = passk_from_json(Json{{"query_id", "x"}, {"attempts", 8}, {"successes", 2}});
  EXPECT_DOUBLE_EQ(r.pass_rate(), 0.25);
  EXPECT_THROW(passk_from_json(Json{{"query_id", "x"}, {"attempts", 8}, {"successes", 9}}),
               SchemaError);
}
