#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "blocksim/backend.h"
#include "blocksim/types.h"

namespace blocksim {

struct CandidateRequest {
  TokenCount prompt_tokens = 0;
  TokenCount estimated_output_tokens = 0;
};

struct PredictionRequest {
  InstanceSnapshot snapshot;
  CandidateRequest candidate;
  InstanceConfig instance_config;  // instance_id must match the snapshot
};

struct PredictionResult {
  // Contains at least predicted_ttft and predicted_e2e_latency (seconds,
  // measured from snapshot_time); also predicted_queueing_delay.
  std::map<std::string, double> metrics;
  std::int64_t simulated_steps = 0;

  double e2e() const { return metrics.at("predicted_e2e_latency"); }
  double ttft() const { return metrics.at("predicted_ttft"); }
};

enum class CacheMode { kOff, kExact, kBucketed };

CacheMode parse_cache_mode(const std::string& name);

// Memoizes batch latencies keyed by (decode count, prefill tokens,
// context bucket). In exact mode the bucket is the context itself, so a
// hit returns precisely what batch_latency would compute. In bucketed
// mode the context rounds to the nearest bucket and the stored value is
// computed for that representative, bounding the per-step error by
// c_context * bucket/2 regardless of insertion order.
class LatencyCache {
 public:
  explicit LatencyCache(CacheMode mode = CacheMode::kExact, TokenCount context_bucket = 256);

  double lookup_or_compute(const BatchPlan& plan, const CostModelParams& params);

  std::uint64_t hits() const;
  std::uint64_t misses() const;
  std::size_t size() const;
  CacheMode mode() const { return mode_; }

 private:
  struct Key {
    std::int64_t decode_count;
    std::int64_t prefill_tokens;
    std::int64_t context_bucket;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (std::uint64_t v : {static_cast<std::uint64_t>(k.decode_count),
                              static_cast<std::uint64_t>(k.prefill_tokens),
                              static_cast<std::uint64_t>(k.context_bucket)}) {
        h = (h ^ v) * 0x100000001b3ULL;
      }
      return static_cast<std::size_t>(h);
    }
  };

  CacheMode mode_;
  TokenCount context_bucket_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, double, KeyHash> entries_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

// Decode-overrun correction: any tracked request whose decoded length has
// reached its estimate gets re-estimated to decoded + 10.
InstanceSnapshot correct_lengths(InstanceSnapshot snapshot);

// Forward-simulates the instance's local scheduler from the snapshot with
// the candidate appended to the waiting-queue tail, using estimated
// lengths as true lengths and admitting no new arrivals, until the
// candidate finishes. Stateless and deterministic; `cache` may be null.
PredictionResult predict(const PredictionRequest& request, LatencyCache* cache = nullptr);

// Independent predict per snapshot; result keyed by instance id.
// `config_template` supplies everything but the instance id.
std::map<InstanceId, PredictionResult> predict_across(
    const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate,
    const InstanceConfig& config_template, LatencyCache* cache = nullptr);

}  // namespace blocksim
