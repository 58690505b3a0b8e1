#include "blocksim/autoscaler.h"

#include "blocksim/error.h"

namespace blocksim {

const char* to_string(ProvisionKind kind) {
  switch (kind) {
    case ProvisionKind::kStatic: return "static";
    case ProvisionKind::kPreempt: return "preempt";
    case ProvisionKind::kRelief: return "relief";
  }
  return "unknown";
}

ProvisionKind parse_provision_kind(const std::string& name) {
  if (name == "static") return ProvisionKind::kStatic;
  if (name == "preempt") return ProvisionKind::kPreempt;
  if (name == "relief") return ProvisionKind::kRelief;
  throw ConfigError("provision.kind", "unknown provision kind '" + name + "'");
}

void validate_provision_policy(const ProvisionPolicy& policy) {
  if (!(policy.threshold_s > 0)) throw ConfigError("provision.threshold_s", "must be > 0");
  if (policy.cold_start_s < 0) throw ConfigError("provision.cold_start_s", "must be >= 0");
  if (policy.cooldown_s < 0) throw ConfigError("provision.cooldown_s", "must be >= 0");
  if (policy.min_instances > policy.max_instances)
    throw ConfigError("provision.min_instances", "must be <= max_instances");
}

Autoscaler::Autoscaler(ProvisionPolicy policy, int initial_active)
    : policy_(policy), active_(initial_active) {
  validate_provision_policy(policy_);
}

bool Autoscaler::evaluate(ProvisionSignal signal, double latency_s, SimTime now) {
  if (policy_.kind == ProvisionKind::kStatic) return false;
  const ProvisionSignal wanted = policy_.kind == ProvisionKind::kPreempt
                                     ? ProvisionSignal::kPredictedLatency
                                     : ProvisionSignal::kRealizedLatency;
  if (signal != wanted) return false;
  if (latency_s < policy_.threshold_s) return false;
  if (last_provision_ &&
      now - *last_provision_ < SimTime::from_seconds(policy_.cooldown_s)) {
    return false;
  }
  if (active_ + pending_ >= policy_.max_instances) return false;
  last_provision_ = now;
  ++pending_;
  ++provisioned_total_;
  return true;
}

void Autoscaler::on_provision_complete() {
  --pending_;
  ++active_;
}

}  // namespace blocksim
