#include "blocksim/types.h"

#include <cstdio>

#include "blocksim/error.h"

namespace blocksim {

std::string SimTime::to_string() const {
  std::int64_t t = ticks_;
  const bool negative = t < 0;
  if (negative) t = -t;
  const std::int64_t whole = t / 1000000000;
  const std::int64_t frac = t % 1000000000;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%s%lld.%09lld", negative ? "-" : "",
                static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

const char* to_string(RequestState state) {
  switch (state) {
    case RequestState::kCreated: return "created";
    case RequestState::kDispatched: return "dispatched";
    case RequestState::kWaiting: return "waiting";
    case RequestState::kRunning: return "running";
    case RequestState::kPreempted: return "preempted";
    case RequestState::kFinished: return "finished";
  }
  return "unknown";
}

const char* to_string(LocalPolicy policy) {
  switch (policy) {
    case LocalPolicy::kChunkedPrefill: return "chunked_prefill";
    case LocalPolicy::kPrefillPriority: return "prefill_priority";
  }
  return "unknown";
}

LocalPolicy parse_local_policy(const std::string& name) {
  if (name == "chunked_prefill") return LocalPolicy::kChunkedPrefill;
  if (name == "prefill_priority") return LocalPolicy::kPrefillPriority;
  throw ConfigError("cluster.local_policy", "unknown policy '" + name + "'");
}

void validate_instance_config(const InstanceConfig& cfg) {
  if (cfg.total_blocks < 1) throw ConfigError("total_blocks", "must be >= 1");
  if (cfg.block_size < 1) throw ConfigError("block_size", "must be >= 1");
  if (cfg.max_batch_size < 1) throw ConfigError("max_batch_size", "must be >= 1");
  if (cfg.chunk_budget < cfg.block_size)
    throw ConfigError("chunk_budget", "must be >= block_size");
  const auto& c = cfg.cost_model;
  if (!(c.c0_s > 0)) throw ConfigError("cost_model.c0_s", "must be > 0");
  if (c.prefill_s_per_token < 0)
    throw ConfigError("cost_model.prefill_s_per_token", "must be >= 0");
  if (c.decode_s_per_seq < 0)
    throw ConfigError("cost_model.decode_s_per_seq", "must be >= 0");
  if (c.context_s_per_token < 0)
    throw ConfigError("cost_model.context_s_per_token", "must be >= 0");
}

BlockCount blocks_needed(std::int64_t tokens, int block_size) {
  if (tokens <= 0) return 0;
  return (tokens + block_size - 1) / block_size;
}

}  // namespace blocksim
