#include <benchmark/benchmark.h>

#include "blocksim/backend.h"
#include "blocksim/predictor.h"
#include "blocksim/scheduler.h"

namespace {

using namespace blocksim;

InstanceConfig reference_config(InstanceId id = 0) {
  InstanceConfig cfg;
  cfg.instance_id = id;
  cfg.total_blocks = 1056;
  cfg.block_size = 16;
  cfg.max_batch_size = 48;
  cfg.chunk_budget = 512;
  return cfg;
}

InstanceSnapshot loaded_snapshot(InstanceId id, int running, int waiting) {
  InstanceSnapshot snap;
  snap.instance_id = id;
  for (int i = 0; i < running; ++i) {
    snap.running.push_back({static_cast<RequestId>(i), 96, 220, 96, 30 + (i % 40)});
  }
  for (int i = 0; i < waiting; ++i) {
    snap.waiting.push_back({static_cast<RequestId>(1000 + i), 300, 180, 0, 0});
  }
  snap.batch_size = running;
  std::int64_t held = 0;
  for (const auto& r : snap.running) held += blocks_needed(r.prefill_progress + r.decoded_tokens, 16);
  snap.free_blocks = static_cast<int>(1056 - held);
  return snap;
}

void BM_InstanceStep_FullBatch(benchmark::State& state) {
  Instance inst = Instance::from_snapshot(loaded_snapshot(0, 48, 4), reference_config());
  for (auto _ : state) {
    if (!inst.has_work()) {
      state.PauseTiming();
      inst = Instance::from_snapshot(loaded_snapshot(0, 48, 4), reference_config());
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(inst.execute_step());
  }
}
BENCHMARK(BM_InstanceStep_FullBatch);

void BM_Predict(benchmark::State& state) {
  const int running = static_cast<int>(state.range(0));
  PredictionRequest request;
  request.snapshot = loaded_snapshot(0, running, 2);
  request.candidate = {400, 150};
  request.instance_config = reference_config();
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(request));
  }
}
BENCHMARK(BM_Predict)->Arg(0)->Arg(16)->Arg(48);

void BM_Predict_CacheModes(benchmark::State& state) {
  PredictionRequest request;
  request.snapshot = loaded_snapshot(0, 48, 2);
  request.candidate = {400, 150};
  request.instance_config = reference_config();
  const CacheMode mode = static_cast<CacheMode>(state.range(0));
  LatencyCache cache(mode == CacheMode::kOff ? CacheMode::kExact : mode);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(request, mode == CacheMode::kOff ? nullptr : &cache));
  }
}
BENCHMARK(BM_Predict_CacheModes)
    ->Arg(static_cast<int>(CacheMode::kOff))
    ->Arg(static_cast<int>(CacheMode::kExact))
    ->Arg(static_cast<int>(CacheMode::kBucketed));

void BM_Dispatch_BlockPredictive(benchmark::State& state) {
  const int instances = static_cast<int>(state.range(0));
  std::vector<InstanceSnapshot> snapshots;
  for (int i = 0; i < instances; ++i) {
    snapshots.push_back(loaded_snapshot(i, 8 + 3 * i, i % 3));
  }
  LatencyCache cache;
  LocalPredictorClient client(reference_config(), &cache);
  Dispatcher dispatcher({PolicyKind::kBlockPredictive, 0, LatencyObjective::kE2e},
                        reference_config());
  for (auto _ : state) {
    benchmark::DoNotOptimize(dispatcher.dispatch({400, 150}, snapshots, &client));
  }
}
BENCHMARK(BM_Dispatch_BlockPredictive)->Arg(4)->Arg(8)->Arg(12);

void BM_Dispatch_Heuristics(benchmark::State& state) {
  std::vector<InstanceSnapshot> snapshots;
  for (int i = 0; i < 12; ++i) snapshots.push_back(loaded_snapshot(i, 8 + 3 * i, i % 3));
  Dispatcher dispatcher({static_cast<PolicyKind>(state.range(0)), 1, LatencyObjective::kE2e},
                        reference_config());
  for (auto _ : state) {
    benchmark::DoNotOptimize(dispatcher.dispatch({400, 150}, snapshots, nullptr));
  }
}
BENCHMARK(BM_Dispatch_Heuristics)
    ->Arg(static_cast<int>(PolicyKind::kRandom))
    ->Arg(static_cast<int>(PolicyKind::kMinQpm))
    ->Arg(static_cast<int>(PolicyKind::kLlumnixMinus));

}  // namespace

BENCHMARK_MAIN();
