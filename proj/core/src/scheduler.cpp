#include "blocksim/scheduler.h"

#include <algorithm>
#include <limits>

#include "blocksim/error.h"

namespace blocksim {

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kRoundRobin: return "round_robin";
    case PolicyKind::kMinQpm: return "min_qpm";
    case PolicyKind::kInfaasPlusPlus: return "infaas_plus_plus";
    case PolicyKind::kLlumnixMinus: return "llumnix_minus";
    case PolicyKind::kBlockPredictive: return "block_predictive";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "random") return PolicyKind::kRandom;
  if (name == "round_robin" || name == "roundrobin") return PolicyKind::kRoundRobin;
  if (name == "min_qpm" || name == "minqpm") return PolicyKind::kMinQpm;
  if (name == "infaas_plus_plus" || name == "infaas++" || name == "infaaspp")
    return PolicyKind::kInfaasPlusPlus;
  if (name == "llumnix_minus" || name == "llumnix-") return PolicyKind::kLlumnixMinus;
  if (name == "block_predictive" || name == "block") return PolicyKind::kBlockPredictive;
  throw ConfigError("scheduler.policy", "unknown policy '" + name + "'");
}

double load_infaas(const InstanceSnapshot& snapshot, int total_blocks) {
  const double used = static_cast<double>(total_blocks - snapshot.free_blocks);
  return used / static_cast<double>(std::max(snapshot.batch_size, 1));
}

double load_llumnix(const InstanceSnapshot& snapshot, int total_blocks, int block_size) {
  const double used = static_cast<double>(total_blocks - snapshot.free_blocks);
  std::int64_t prefill_memory = 0;
  for (const SnapshotRequest& r : snapshot.waiting) {
    prefill_memory += blocks_needed(r.prompt_tokens - r.prefill_progress, block_size);
  }
  return (used + static_cast<double>(prefill_memory)) /
         static_cast<double>(std::max(snapshot.batch_size, 1));
}

void QpmTracker::record_dispatch(InstanceId instance_id, SimTime now) {
  auto& window = dispatches_[instance_id];
  window.push_back(now);
  const SimTime cutoff = now - SimTime::from_seconds(60.0);
  while (!window.empty() && window.front() <= cutoff) window.pop_front();
}

int QpmTracker::qpm(InstanceId instance_id, SimTime now) const {
  auto it = dispatches_.find(instance_id);
  if (it == dispatches_.end()) return 0;
  const SimTime cutoff = now - SimTime::from_seconds(60.0);
  // Window entries are sorted; count those strictly younger than 60s.
  const auto& window = it->second;
  auto first = std::upper_bound(window.begin(), window.end(), cutoff);
  return static_cast<int>(window.end() - first);
}

Dispatcher::Dispatcher(PolicyConfig config, InstanceConfig instance_template)
    : config_(config), template_(std::move(instance_template)), rng_(config.seed) {}

InstanceId Dispatcher::pick_heuristic(PolicyKind kind,
                                      const std::vector<InstanceSnapshot>& snapshots) {
  switch (kind) {
    case PolicyKind::kRandom: {
      std::vector<InstanceId> ids;
      ids.reserve(snapshots.size());
      for (const auto& s : snapshots) ids.push_back(s.instance_id);
      std::sort(ids.begin(), ids.end());
      return ids[rng_.below(ids.size())];
    }
    case PolicyKind::kRoundRobin: {
      std::vector<InstanceId> ids;
      ids.reserve(snapshots.size());
      for (const auto& s : snapshots) ids.push_back(s.instance_id);
      std::sort(ids.begin(), ids.end());
      return ids[rr_cursor_++ % ids.size()];
    }
    case PolicyKind::kMinQpm:
    case PolicyKind::kInfaasPlusPlus:
    case PolicyKind::kLlumnixMinus: {
      double best_score = std::numeric_limits<double>::infinity();
      InstanceId best_id = 0;
      bool first = true;
      for (const auto& s : snapshots) {
        double score = 0;
        if (kind == PolicyKind::kMinQpm) {
          score = static_cast<double>(s.qpm);
        } else if (kind == PolicyKind::kInfaasPlusPlus) {
          score = load_infaas(s, template_.total_blocks);
        } else {
          score = load_llumnix(s, template_.total_blocks, template_.block_size);
        }
        if (first || score < best_score ||
            (score == best_score && s.instance_id < best_id)) {
          best_score = score;
          best_id = s.instance_id;
          first = false;
        }
      }
      return best_id;
    }
    case PolicyKind::kBlockPredictive:
      break;
  }
  throw Error("pick_heuristic called with a non-heuristic policy");
}

DispatchDecision Dispatcher::dispatch(const CandidateRequest& candidate,
                                      const std::vector<InstanceSnapshot>& snapshots,
                                      PredictorClient* predictor) {
  if (snapshots.empty()) throw NoInstancesError("dispatch with no instances");

  DispatchDecision decision;
  if (config_.kind != PolicyKind::kBlockPredictive) {
    decision.instance_id = pick_heuristic(config_.kind, snapshots);
    return decision;
  }

  if (predictor == nullptr) {
    throw PredictorUnavailableError("BlockPredictive policy requires a predictor");
  }
  try {
    decision.predictions = predictor->predict_across(snapshots, candidate);
  } catch (const PredictorUnavailableError&) {
    decision.instance_id = pick_heuristic(PolicyKind::kLlumnixMinus, snapshots);
    decision.used_fallback = true;
    ++fallbacks_;
    return decision;
  }

  double best = std::numeric_limits<double>::infinity();
  InstanceId best_id = 0;
  bool first = true;
  for (const auto& [id, prediction] : decision.predictions) {
    const double value =
        config_.objective == LatencyObjective::kE2e ? prediction.e2e() : prediction.ttft();
    if (first || value < best || (value == best && id < best_id)) {
      best = value;
      best_id = id;
      first = false;
    }
  }
  decision.instance_id = best_id;
  return decision;
}

}  // namespace blocksim
