#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "blocksim/autoscaler.h"
#include "blocksim/backend.h"
#include "blocksim/config.h"
#include "blocksim/event_loop.h"
#include "blocksim/metrics.h"
#include "blocksim/predictor.h"
#include "blocksim/scheduler.h"
#include "blocksim/workload.h"

namespace blocksim {

// Owns one simulated cluster: engine, backends, dispatcher, autoscaler,
// probe sampler. Copyable so a probe can fork the whole simulation to
// measure counterfactual latencies.
class SimulationDriver : public EventHandler {
 public:
  explicit SimulationDriver(ExperimentSpec spec);
  SimulationDriver(const SimulationDriver& other);
  SimulationDriver& operator=(const SimulationDriver&) = delete;

  // Drives the event loop to exhaustion (or the configured duration cap)
  // and assembles the run log.
  RunLog run();

  void handle(const Event& event) override;
  void end_of_instant(SimTime now) override;

  const std::vector<Request>& requests() const { return requests_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const EventLoop& engine() const { return engine_; }
  std::uint64_t fallback_count() const { return dispatcher_.fallback_count(); }

 private:
  void handle_arrival(RequestId rid);
  void handle_dispatch(RequestId rid, InstanceId iid);
  void handle_batch_complete(InstanceId iid);
  void handle_provision_complete(InstanceId iid);
  void admit_to_instance(RequestId rid, InstanceId iid, SimTime now);
  void maybe_provision(ProvisionSignal signal, double latency_s, SimTime now);
  std::vector<InstanceSnapshot> build_snapshots(SimTime now) const;
  std::vector<std::pair<InstanceId, double>> counterfactual_latencies(RequestId rid, SimTime now);
  RunLog assemble_log();

  ExperimentSpec spec_;
  EventLoop engine_;
  std::vector<Instance> instances_;  // instance_id == index
  std::vector<Request> requests_;
  std::vector<int> preempt_counts_;
  Dispatcher dispatcher_;
  std::unique_ptr<LatencyCache> cache_;
  std::unique_ptr<LocalPredictorClient> predictor_;
  QpmTracker qpm_;
  Autoscaler autoscaler_;
  ProbeSampler sampler_;

  std::vector<RunLog::DispatchPoint> dispatch_points_;
  std::vector<RunLog::ProbeRow> probes_;
  std::int64_t cum_preemptions_ = 0;
  InstanceId next_instance_id_ = 0;

  // Fork support: forced routing for the probed request, probes disabled
  // inside forks.
  std::map<RequestId, InstanceId> forced_dispatch_;
  bool probes_enabled_ = true;
};

// Convenience wrapper: build a driver, run it, aggregate nothing.
RunLog run_experiment(const ExperimentSpec& spec);

// One sweep cell = (policy, qps, seed). Failures are recorded, not fatal.
struct SweepCell {
  PolicyKind policy = PolicyKind::kRoundRobin;
  double qps = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mean_ttft_s = 0, p99_ttft_s = 0;
  double mean_e2e_s = 0, p99_e2e_s = 0;
  double throughput_rps = 0;
  std::int64_t total_preemptions = 0;
  int finished_requests = 0;
  double free_blocks_var_avg = 0;
};

// Applies (policy, qps, seed) onto the base spec; the seed reseeds the
// workload, scheduler, estimator, and probe streams together.
ExperimentSpec spec_for_cell(const ExperimentSpec& base, PolicyKind policy, double qps,
                             std::uint64_t seed);

std::vector<SweepCell> run_sweep(const ExperimentSpec& base, const SweepSpec& sweep);

struct CapacityTableRow {
  PolicyKind policy;
  CapacityResult result;
};

struct CapacityTable {
  std::vector<CapacityTableRow> rows;
  PolicyKind baseline;
  double baseline_capacity = 0;
  // Formatted like "16.7%" per non-baseline policy, keyed by policy name.
  std::vector<std::pair<std::string, std::string>> gains;
};

CapacityTable run_capacity(const ExperimentSpec& base, const CapacitySpec& capacity);

// One-decimal percent formatting ("16.7%").
std::string format_percent(double fraction);

}  // namespace blocksim
