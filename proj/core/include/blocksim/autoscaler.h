#pragma once

#include <optional>
#include <string>

#include "blocksim/time.h"

namespace blocksim {

enum class ProvisionKind { kStatic, kPreempt, kRelief };

const char* to_string(ProvisionKind kind);
ProvisionKind parse_provision_kind(const std::string& name);

struct ProvisionPolicy {
  ProvisionKind kind = ProvisionKind::kStatic;
  double threshold_s = 70.0;
  double cold_start_s = 30.0;
  double cooldown_s = 15.0;
  int min_instances = 1;
  int max_instances = 1;
};

void validate_provision_policy(const ProvisionPolicy& policy);

enum class ProvisionSignal {
  kPredictedLatency,  // per dispatch (preempt strategy)
  kRealizedLatency,   // per completion (relief strategy)
};

// Latency-threshold instance provisioning. Preempt triggers on predicted
// latency at dispatch time; relief waits for a realized latency to cross
// the same threshold. Instances are only ever added, never removed.
class Autoscaler {
 public:
  Autoscaler(ProvisionPolicy policy, int initial_active);

  // True means AddInstance: the signal matches the strategy, the value is
  // at or above the threshold, the cooldown has elapsed, and there is
  // room below max_instances (counting in-flight provisions).
  bool evaluate(ProvisionSignal signal, double latency_s, SimTime now);

  void on_provision_complete();

  int active() const { return active_; }
  int pending() const { return pending_; }
  int provisioned_total() const { return provisioned_total_; }
  const ProvisionPolicy& policy() const { return policy_; }

 private:
  ProvisionPolicy policy_;
  int active_;
  int pending_ = 0;
  int provisioned_total_ = 0;
  std::optional<SimTime> last_provision_;
};

}  // namespace blocksim
