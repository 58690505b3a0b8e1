#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "blocksim/predictor.h"
#include "blocksim/rand.h"
#include "blocksim/time.h"
#include "blocksim/types.h"

namespace blocksim {

enum class PolicyKind {
  kRandom,
  kRoundRobin,
  kMinQpm,
  kInfaasPlusPlus,
  kLlumnixMinus,
  kBlockPredictive,
};

const char* to_string(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

enum class LatencyObjective { kE2e, kTtft };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kRoundRobin;
  std::uint64_t seed = 0;                            // Random's stream
  LatencyObjective objective = LatencyObjective::kE2e;  // BlockPredictive argmin metric
};

// usedMemory / batchSize with an idle instance scored 0 via max(batch, 1).
double load_infaas(const InstanceSnapshot& snapshot, int total_blocks);

// (usedMemory + prefillMemory) / batchSize, where prefillMemory sums the
// blocks needed to prefill every pending request.
double load_llumnix(const InstanceSnapshot& snapshot, int total_blocks, int block_size);

// Trailing-60s dispatch counter per instance.
class QpmTracker {
 public:
  void record_dispatch(InstanceId instance_id, SimTime now);
  int qpm(InstanceId instance_id, SimTime now) const;

 private:
  std::map<InstanceId, std::deque<SimTime>> dispatches_;
};

// Abstracts where predictions come from, so the dispatcher is identical
// in-process and behind the wire API. Implementations throw
// PredictorUnavailableError when the predictor cannot be reached.
class PredictorClient {
 public:
  virtual ~PredictorClient() = default;
  virtual std::map<InstanceId, PredictionResult> predict_across(
      const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate) = 0;
};

class LocalPredictorClient : public PredictorClient {
 public:
  LocalPredictorClient(InstanceConfig config_template, LatencyCache* cache)
      : template_(std::move(config_template)), cache_(cache) {}
  std::map<InstanceId, PredictionResult> predict_across(
      const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate) override {
    return blocksim::predict_across(snapshots, candidate, template_, cache_);
  }

 private:
  InstanceConfig template_;
  LatencyCache* cache_;
};

struct DispatchDecision {
  InstanceId instance_id = 0;
  bool used_fallback = false;
  // Populated when the predictor was consulted (BlockPredictive).
  std::map<InstanceId, PredictionResult> predictions;
};

// Stateless selection over snapshots; the only cross-request state is the
// seeded random stream, the round-robin cursor, and the fallback counter,
// all local to this replica. Ties break toward the lowest instance id.
class Dispatcher {
 public:
  Dispatcher(PolicyConfig config, InstanceConfig instance_template);

  DispatchDecision dispatch(const CandidateRequest& candidate,
                            const std::vector<InstanceSnapshot>& snapshots,
                            PredictorClient* predictor);

  std::uint64_t fallback_count() const { return fallbacks_; }
  const PolicyConfig& policy() const { return config_; }

 private:
  InstanceId pick_heuristic(PolicyKind kind, const std::vector<InstanceSnapshot>& snapshots);

  PolicyConfig config_;
  InstanceConfig template_;
  SplitMix64 rng_;
  std::uint64_t rr_cursor_ = 0;
  std::uint64_t fallbacks_ = 0;
};

}  // namespace blocksim
