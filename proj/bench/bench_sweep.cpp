// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "drhw/simulator.hpp"
#include "drhw/workload_gen.hpp"

namespace {

using namespace drhw;

const Workload& pocketgl() {
  static const Workload w = preset_pocketgl(1);
  return w;
}

const ScheduleStore& pocketgl_store() {
  static const ScheduleStore s = build_store(pocketgl(), 4);
  return s;
}

SimConfig config(int iterations) {
  SimConfig c;
  c.iterations = iterations;
  return c;
}

const std::vector<int> kTiles{2, 3, 4, 5, 6, 7, 8};

void BM_SweepParallel(benchmark::State& state) {
  auto c = config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(pocketgl(), pocketgl_store(), c, kTiles));
}

void BM_SweepSerial(benchmark::State& state) {
  auto c = config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep_serial(pocketgl(), pocketgl_store(), c, kTiles));
}

void BM_StoreParallel(benchmark::State& state) {
  auto w = preset_table1(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_store(w, 4));
}

void BM_StoreSerial(benchmark::State& state) {
  auto w = preset_table1(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_store_serial(w, 4));
}

}  // namespace

BENCHMARK(BM_SweepParallel)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepSerial)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StoreParallel)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StoreSerial)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
