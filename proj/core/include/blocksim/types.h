#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blocksim/time.h"

namespace blocksim {

using RequestId = std::uint64_t;
using InstanceId = int;
using TokenCount = std::int32_t;
using BlockCount = std::int64_t;

enum class RequestState {
  kCreated,
  kDispatched,
  kWaiting,
  kRunning,
  kPreempted,
  kFinished,
};

const char* to_string(RequestState state);

// One inference query as the harness tracks it. The instance keeps its own
// progress counters; this record owns identity, lengths, and timestamps.
struct Request {
  RequestId id = 0;
  TokenCount prompt_tokens = 0;
  TokenCount true_output_tokens = 0;
  TokenCount estimated_output_tokens = 0;
  SimTime arrival_time;
  std::optional<SimTime> dispatch_time;
  std::optional<SimTime> first_token_time;
  std::optional<SimTime> finish_time;
  RequestState state = RequestState::kCreated;
  TokenCount prefill_progress = 0;
  TokenCount decoded_tokens = 0;
};

// Linear batch cost model: coefficients stand in for profiled-operator
// interpolation on real hardware.
struct CostModelParams {
  double c0_s = 0.01;                  // fixed per-step overhead
  double prefill_s_per_token = 1e-4;   // per prefill token
  double decode_s_per_seq = 1e-3;      // per decode sequence
  double context_s_per_token = 1e-7;   // per cached context token attended
};

enum class LocalPolicy { kChunkedPrefill, kPrefillPriority };

const char* to_string(LocalPolicy policy);
LocalPolicy parse_local_policy(const std::string& name);

struct InstanceConfig {
  InstanceId instance_id = 0;
  int total_blocks = 1056;
  int block_size = 16;
  int max_batch_size = 48;
  int chunk_budget = 512;
  LocalPolicy local_policy = LocalPolicy::kChunkedPrefill;
  CostModelParams cost_model;
};

// Throws ConfigError naming the violated field.
void validate_instance_config(const InstanceConfig& cfg);

// ceil(tokens / block_size); 0 tokens need 0 blocks.
BlockCount blocks_needed(std::int64_t tokens, int block_size);

// One running/waiting entry in a status snapshot.
struct SnapshotRequest {
  RequestId id = 0;
  TokenCount prompt_tokens = 0;
  TokenCount estimated_output_tokens = 0;
  TokenCount prefill_progress = 0;
  TokenCount decoded_tokens = 0;
};

// The status-API payload. `running` is ordered oldest batch admission
// first, `waiting` head first; free_blocks always satisfies
// free + sum(blocks held by running) == total_blocks.
struct InstanceSnapshot {
  InstanceId instance_id = 0;
  SimTime snapshot_time;
  int free_blocks = 0;
  int batch_size = 0;
  int qpm = 0;
  std::vector<SnapshotRequest> running;
  std::vector<SnapshotRequest> waiting;
};

}  // namespace blocksim
