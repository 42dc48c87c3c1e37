#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/model.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/simulate.hpp"
#include "aigflow/trainer.hpp"

using namespace aigflow;

namespace {

const Aig& circuit(const std::string& name) {
  static std::map<std::string, Aig> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, read_aiger_file(std::string(AIGFLOW_BENCH_DATA) + name)).first;
  return it->second;
}

const char* const kNames[] = {"b02_profile.aag", "rand_small_1.aag", "ladder_2x30.aag", "rand_large.aag"};

void BM_Partition(benchmark::State& state) {
  const Aig& aig = circuit(kNames[state.range(0)]);
  for (auto _ : state) benchmark::DoNotOptimize(partition(aig, 8, 6));
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_Partition)->DenseRange(0, 3);

void BM_Simulate(benchmark::State& state) {
  const Aig& aig = circuit(kNames[state.range(0)]);
  const auto patterns = default_patterns(aig, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gate_prob(simulate(aig, patterns)));
  state.SetLabel(kNames[state.range(0)]);
  state.counters["patterns"] = static_cast<double>(patterns.num_patterns);
}
BENCHMARK(BM_Simulate)->DenseRange(0, 3);

/// Every working batch of an eval schedule, ready to re-run.
struct Captured {
  const Aig* aig;
  Model model;
  std::vector<WorkingBatch> batches;
};

Captured& captured(const std::string& name) {
  static std::map<std::string, Captured> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  ModelConfig mc;
  mc.seed = 1;
  Captured c{&circuit(name), Model(mc), {}};
  const auto plan = partition(*c.aig, 8, 6);
  run_schedule(*c.aig, plan, build_batches(plan, 16, 0, BatchMode::kEval), [&](const WorkingBatch& wb) {
    c.batches.push_back(wb);
    return node_states(c.model.forward(*c.aig, wb));
  });
  return cache.emplace(name, std::move(c)).first->second;
}

template <AttentionMode Mode>
void BM_Forward(benchmark::State& state) {
  auto& c = captured(kNames[state.range(0)]);
  for (auto _ : state)
    for (const auto& wb : c.batches) benchmark::DoNotOptimize(c.model.forward(*c.aig, wb, Mode));
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_Forward<AttentionMode::kGeneral>)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward<AttentionMode::kFastDegree1>)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

template <AttentionMode Mode>
void BM_Tokenize(benchmark::State& state) {
  auto& c = captured(kNames[state.range(0)]);
  for (auto _ : state)
    for (const auto& wb : c.batches) benchmark::DoNotOptimize(c.model.tokenize(*c.aig, wb, Mode));
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_Tokenize<AttentionMode::kGeneral>)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tokenize<AttentionMode::kFastDegree1>)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
