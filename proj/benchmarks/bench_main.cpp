#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "tandem/grpo.hpp"
#include "tandem/oracle/oracle.hpp"
#include "tandem/reward.hpp"
#include "tandem/toy_policy.hpp"
#include "tandem/trace.hpp"

namespace {

using namespace tandem;

void BM_Advantages(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> rewards(static_cast<std::size_t>(state.range(0)));
  for (double& r : rewards) r = rng.uniform01();
  for (auto _ : state) benchmark::DoNotOptimize(compute_advantages(rewards, 1e-8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Advantages)->Arg(8)->Arg(64)->Arg(1024);

oracle::ToyInstance toy(std::uint64_t seed) {
  Rng rng(seed);
  return oracle::make_toy_instance(rng);
}

void BM_ToyObjective(benchmark::State& state) {
  const auto inst = toy(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        toy_objective(inst.current, inst.old, inst.reference, inst.groups, inst.config));
  }
}
BENCHMARK(BM_ToyObjective);

void BM_ToyGradient(benchmark::State& state) {
  const auto inst = toy(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grpo_gradient(inst.current, inst.old, inst.reference, inst.groups, inst.config));
  }
  state.counters["params"] = static_cast<double>(inst.current.parameter_count());
}
BENCHMARK(BM_ToyGradient);

void BM_StGrpoReward(benchmark::State& state) {
  ReasoningTrace t;
  t.query_id = "q";
  for (int i = 1; i <= 6; ++i) {
    t.steps.push_back({i, "step", "some detail text", i == 6 ? StepAction::Summary : StepAction::Continue});
  }
  t.final_summary = "done";
  t.final_answer = "[2, 6]";
  const std::string output = serialize_trace(t);
  for (auto _ : state) {
    const auto answer = extract_answer(output, FormatMode::FullTrace);
    const auto pred = parse_prediction(RewardTask::TemporalGrounding, *answer);
    benchmark::DoNotOptimize(
        st_grpo_reward(RewardTask::TemporalGrounding, output, pred, "[4, 8]", FormatMode::FullTrace));
  }
}
BENCHMARK(BM_StGrpoReward);

void BM_Jigsaw(benchmark::State& state) {
  std::vector<int> truth(static_cast<std::size_t>(state.range(0)));
  std::iota(truth.begin(), truth.end(), 1);
  std::vector<int> pred(truth.rbegin(), truth.rend());
  for (auto _ : state) benchmark::DoNotOptimize(jigsaw_reward(pred, truth));
}
BENCHMARK(BM_Jigsaw)->Arg(4)->Arg(16);

void BM_TraceRoundTrip(benchmark::State& state) {
  ReasoningTrace t;
  t.query_id = "q";
  const int n = static_cast<int>(state.range(0));
  for (int i = 1; i <= n; ++i) {
    t.steps.push_back({i, "summary of step " + std::to_string(i),
                       std::string(200, 'x'), i == n ? StepAction::Summary : StepAction::Continue});
  }
  t.final_summary = "final";
  t.final_answer = "B";
  for (auto _ : state) benchmark::DoNotOptimize(parse_trace(serialize_trace(t)));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TraceRoundTrip)->Arg(4)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
