#include "blocksim/predictor.h"

#include <algorithm>
#include <mutex>

#include "blocksim/error.h"

namespace blocksim {

namespace {
constexpr std::int64_t kMaxSimulatedSteps = 50'000'000;
}

CacheMode parse_cache_mode(const std::string& name) {
  if (name == "off") return CacheMode::kOff;
  if (name == "exact") return CacheMode::kExact;
  if (name == "bucketed") return CacheMode::kBucketed;
  throw ConfigError("predictor.cache", "unknown cache mode '" + name + "'");
}

LatencyCache::LatencyCache(CacheMode mode, TokenCount context_bucket)
    : mode_(mode), context_bucket_(context_bucket) {
  if (context_bucket_ < 1) context_bucket_ = 1;
}

double LatencyCache::lookup_or_compute(const BatchPlan& plan, const CostModelParams& params) {
  if (mode_ == CacheMode::kOff) return batch_latency(plan, params);

  std::int64_t bucket = plan.context_tokens;
  if (mode_ == CacheMode::kBucketed) {
    bucket = (plan.context_tokens + context_bucket_ / 2) / context_bucket_ * context_bucket_;
  }
  const Key key{static_cast<std::int64_t>(plan.decode_ids.size()), plan.total_prefill_tokens,
                bucket};
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      hits_.fetch_add(1, std::memory_order_relaxed);
      return it->second;
    }
  }
  // Compute for the bucket representative, so later hits return exactly
  // the same value a miss would have produced.
  BatchPlan representative = plan;
  representative.context_tokens = bucket;
  const double value = batch_latency(representative, params);
  {
    std::unique_lock lock(mutex_);
    misses_.fetch_add(1, std::memory_order_relaxed);
    entries_[key] = value;  // last writer wins
  }
  return value;
}

std::uint64_t LatencyCache::hits() const { return hits_.load(std::memory_order_relaxed); }

std::uint64_t LatencyCache::misses() const { return misses_.load(std::memory_order_relaxed); }

std::size_t LatencyCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

InstanceSnapshot correct_lengths(InstanceSnapshot snapshot) {
  auto correct = [](SnapshotRequest& r) {
    if (r.decoded_tokens >= r.estimated_output_tokens) {
      r.estimated_output_tokens = r.decoded_tokens + 10;
    }
  };
  for (SnapshotRequest& r : snapshot.running) correct(r);
  for (SnapshotRequest& r : snapshot.waiting) correct(r);
  return snapshot;
}

PredictionResult predict(const PredictionRequest& request, LatencyCache* cache) {
  const InstanceSnapshot corrected = correct_lengths(request.snapshot);

  RequestId candidate_id = 0;
  for (const SnapshotRequest& r : corrected.running) candidate_id = std::max(candidate_id, r.id);
  for (const SnapshotRequest& r : corrected.waiting) candidate_id = std::max(candidate_id, r.id);
  candidate_id += 1;

  try {
    Instance instance = Instance::from_snapshot(corrected, request.instance_config);
    instance.admit(candidate_id, request.candidate.prompt_tokens,
                   request.candidate.estimated_output_tokens,
                   request.candidate.estimated_output_tokens);

    const CostModelParams& params = request.instance_config.cost_model;
    Instance::LatencyFn latency_fn =
        cache != nullptr
            ? Instance::LatencyFn(
                  [cache, &params](const BatchPlan& p) { return cache->lookup_or_compute(p, params); })
            : Instance::LatencyFn([&params](const BatchPlan& p) { return batch_latency(p, params); });

    PredictionResult result;
    SimTime elapsed = SimTime::zero();
    bool queue_delay_set = false;
    bool ttft_set = false;
    while (true) {
      if (!instance.has_work()) {
        throw PredictionError("candidate vanished from the forward simulation");
      }
      const SimTime step_start_elapsed = elapsed;
      const StepResult step = instance.execute_step(latency_fn);
      elapsed += step.duration;
      result.simulated_steps += 1;
      if (!queue_delay_set &&
          std::find(step.started.begin(), step.started.end(), candidate_id) !=
              step.started.end()) {
        result.metrics["predicted_queueing_delay"] = step_start_elapsed.seconds();
        queue_delay_set = true;
      }
      if (!ttft_set && std::find(step.first_tokens.begin(), step.first_tokens.end(),
                                 candidate_id) != step.first_tokens.end()) {
        result.metrics["predicted_ttft"] = elapsed.seconds();
        ttft_set = true;
      }
      if (std::find(step.completed.begin(), step.completed.end(), candidate_id) !=
          step.completed.end()) {
        result.metrics["predicted_e2e_latency"] = elapsed.seconds();
        break;
      }
      if (result.simulated_steps > kMaxSimulatedSteps) {
        throw PredictionError("forward simulation exceeded the step limit");
      }
    }
    if (!queue_delay_set) result.metrics["predicted_queueing_delay"] = 0.0;
    if (!ttft_set) result.metrics["predicted_ttft"] = result.metrics["predicted_e2e_latency"];
    return result;
  } catch (const DeadlockError& e) {
    throw PredictionError(std::string("backend deadlock during forward simulation: ") + e.what());
  } catch (const RequestTooLargeError& e) {
    throw PredictionError(std::string("candidate does not fit the instance: ") + e.what());
  }
}

std::map<InstanceId, PredictionResult> predict_across(
    const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate,
    const InstanceConfig& config_template, LatencyCache* cache) {
  if (snapshots.empty()) throw NoInstancesError("predict_across needs at least one snapshot");
  std::map<InstanceId, PredictionResult> results;
  for (const InstanceSnapshot& snap : snapshots) {
    PredictionRequest request;
    request.snapshot = snap;
    request.candidate = candidate;
    request.instance_config = config_template;
    request.instance_config.instance_id = snap.instance_id;
    try {
      results[snap.instance_id] = predict(request, cache);
    } catch (const PredictionError& e) {
      throw PredictionError("instance " + std::to_string(snap.instance_id) + ": " + e.what());
    }
  }
  return results;
}

}  // namespace blocksim
