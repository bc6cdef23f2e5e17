#include <benchmark/benchmark.h>

#include "callflow/callseq.hpp"
#include "callflow/corpus.hpp"
#include "callflow/relation.hpp"
#include "callflow/simlab.hpp"

namespace {

callflow::GeneratedPlan plan_of(int n_calls) {
  callflow::RandomPlanSpec spec;
  spec.seed = 42;
  spec.n_calls = n_calls;
  spec.max_rank = 8;
  return callflow::generate_random_plan(spec);
}

void BM_parse(benchmark::State& state) {
  auto plan = plan_of(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto parsed = callflow::parse_sequence(plan.plan_text);
    benchmark::DoNotOptimize(parsed);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_parse)->Arg(20)->Arg(200)->Arg(2000);

void BM_build_graph(benchmark::State& state) {
  auto plan = plan_of(static_cast<int>(state.range(0)));
  auto parsed = callflow::parse_sequence(plan.plan_text);
  for (auto _ : state) {
    auto graph = callflow::build_frg(*parsed.sequence, plan.manifest);
    benchmark::DoNotOptimize(graph);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_build_graph)->Arg(20)->Arg(200)->Arg(2000);

void BM_coordinated_run(benchmark::State& state) {
  auto plan = plan_of(static_cast<int>(state.range(0)));
  auto parsed = callflow::parse_sequence(plan.plan_text);
  auto graph = callflow::build_frg(*parsed.sequence, plan.manifest);
  callflow::RunConfig cfg;
  cfg.processors = 4;
  for (auto _ : state) {
    auto outcome = callflow::run_plan(graph, plan.manifest, cfg);
    benchmark::DoNotOptimize(outcome);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_coordinated_run)->Arg(20)->Arg(100)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
