#include "blocksim/driver.h"

#include <algorithm>
#include <cstdio>
#include <future>
#include <limits>

#include "blocksim/error.h"
#include "blocksim/log.h"

namespace blocksim {

namespace {

InstanceConfig instance_config_for(const InstanceConfig& tmpl, InstanceId id) {
  InstanceConfig cfg = tmpl;
  cfg.instance_id = id;
  return cfg;
}

}  // namespace

SimulationDriver::SimulationDriver(ExperimentSpec spec)
    : spec_(std::move(spec)),
      dispatcher_(spec_.policy, spec_.instance_template),
      cache_(spec_.cache_mode == CacheMode::kOff
                 ? nullptr
                 : std::make_unique<LatencyCache>(spec_.cache_mode, spec_.cache_bucket)),
      predictor_(std::make_unique<LocalPredictorClient>(spec_.instance_template, cache_.get())),
      autoscaler_(spec_.provision, spec_.initial_instances),
      sampler_(spec_.probe.probability, spec_.probe.seed) {
  auto records = spec_.workload.records;
  if (spec_.workload.request_cap && *spec_.workload.request_cap >= 0 &&
      static_cast<std::size_t>(*spec_.workload.request_cap) < records.size()) {
    records.resize(*spec_.workload.request_cap);
  }
  const std::vector<Arrival> arrivals =
      generate_arrivals(records, spec_.workload.qps, spec_.workload.seed);

  requests_.reserve(arrivals.size());
  preempt_counts_.assign(arrivals.size(), 0);
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const Arrival& a = arrivals[i];
    Request r;
    r.id = static_cast<RequestId>(i);  // workload order gives the tiebreak order
    r.prompt_tokens = a.record.prompt_tokens;
    r.true_output_tokens = a.record.output_tokens;
    r.estimated_output_tokens = estimate_length(spec_.workload.estimator, a.record);
    r.arrival_time = a.time;
    requests_.push_back(r);
    engine_.push(EventKind::kArrival, a.time, r.id);
    if (sampler_.sampled(r.id)) engine_.push(EventKind::kProbe, a.time, r.id);
  }

  instances_.reserve(spec_.initial_instances);
  for (int i = 0; i < spec_.initial_instances; ++i) {
    instances_.emplace_back(instance_config_for(spec_.instance_template, i));
  }
  next_instance_id_ = spec_.initial_instances;
}

SimulationDriver::SimulationDriver(const SimulationDriver& other)
    : spec_(other.spec_),
      engine_(other.engine_),
      instances_(other.instances_),
      requests_(other.requests_),
      preempt_counts_(other.preempt_counts_),
      dispatcher_(other.dispatcher_),
      cache_(other.cache_ ? std::make_unique<LatencyCache>(other.cache_->mode(),
                                                           other.spec_.cache_bucket)
                          : nullptr),
      predictor_(std::make_unique<LocalPredictorClient>(other.spec_.instance_template,
                                                        cache_.get())),
      qpm_(other.qpm_),
      autoscaler_(other.autoscaler_),
      sampler_(other.sampler_),
      dispatch_points_(other.dispatch_points_),
      probes_(other.probes_),
      cum_preemptions_(other.cum_preemptions_),
      next_instance_id_(other.next_instance_id_),
      forced_dispatch_(other.forced_dispatch_),
      probes_enabled_(other.probes_enabled_) {}

std::vector<InstanceSnapshot> SimulationDriver::build_snapshots(SimTime now) const {
  std::vector<InstanceSnapshot> snapshots;
  snapshots.reserve(instances_.size());
  for (const Instance& inst : instances_) {
    snapshots.push_back(inst.snapshot(now, qpm_.qpm(inst.config().instance_id, now)));
  }
  return snapshots;
}

void SimulationDriver::handle(const Event& event) {
  switch (event.kind) {
    case EventKind::kArrival:
      handle_arrival(static_cast<RequestId>(event.a));
      break;
    case EventKind::kDispatch:
      handle_dispatch(static_cast<RequestId>(event.a), static_cast<InstanceId>(event.b));
      break;
    case EventKind::kBatchComplete:
      handle_batch_complete(static_cast<InstanceId>(event.a));
      break;
    case EventKind::kProvisionComplete:
      handle_provision_complete(static_cast<InstanceId>(event.a));
      break;
    case EventKind::kProbe:
      break;  // marker; probe work happens at the arrival
  }
}

std::vector<std::pair<InstanceId, double>> SimulationDriver::counterfactual_latencies(
    RequestId rid, SimTime now) {
  // Fork the entire simulation once per instance, pin the probed request
  // to that instance, and read back its realized latency.
  std::vector<std::pair<InstanceId, double>> realized;
  for (const Instance& inst : instances_) {
    const InstanceId iid = inst.config().instance_id;
    SimulationDriver fork(*this);
    fork.probes_enabled_ = false;
    fork.forced_dispatch_[rid] = iid;
    fork.engine_.push(EventKind::kArrival, now, rid);  // re-inject the popped arrival
    fork.run();
    const Request& r = fork.requests_[rid];
    if (r.state == RequestState::kFinished && r.finish_time) {
      realized.emplace_back(iid, (*r.finish_time - r.arrival_time).seconds());
    } else {
      realized.emplace_back(iid, std::numeric_limits<double>::infinity());
    }
  }
  return realized;
}

void SimulationDriver::handle_arrival(RequestId rid) {
  const SimTime now = engine_.now();
  Request& r = requests_[rid];
  r.state = RequestState::kDispatched;

  const std::vector<InstanceSnapshot> snapshots = build_snapshots(now);
  const CandidateRequest candidate{r.prompt_tokens, r.estimated_output_tokens};

  // Memory-balance sample, taken before this dispatch lands.
  RunLog::DispatchPoint point;
  point.time = now;
  point.request_id = rid;
  double mean = 0;
  for (const auto& s : snapshots) mean += s.free_blocks;
  mean /= static_cast<double>(snapshots.size());
  double var = 0;
  for (const auto& s : snapshots) {
    const double d = s.free_blocks - mean;
    var += d * d;
  }
  var /= static_cast<double>(snapshots.size());
  point.free_blocks_mean = mean;
  point.free_blocks_var = var;
  point.cumulative_preemptions = cum_preemptions_;

  DispatchDecision decision;
  const bool probed = probes_enabled_ && sampler_.sampled(rid);
  auto forced = forced_dispatch_.find(rid);
  if (forced != forced_dispatch_.end()) {
    decision.instance_id = forced->second;
  } else if (probed) {
    // Probe protocol: broadcast to every instance and select the one with
    // the minimal predicted latency.
    decision.predictions = predictor_->predict_across(snapshots, candidate);
    double best = std::numeric_limits<double>::infinity();
    InstanceId best_id = 0;
    bool first = true;
    for (const auto& [iid, prediction] : decision.predictions) {
      const double value = prediction.e2e();
      if (first || value < best || (value == best && iid < best_id)) {
        best = value;
        best_id = iid;
        first = false;
      }
    }
    decision.instance_id = best_id;

    RunLog::ProbeRow probe;
    probe.request_id = rid;
    probe.selected_instance = best_id;
    probe.predictions.assign(decision.predictions.begin(), decision.predictions.end());
    if (spec_.probe.counterfactual) {
      probe.counterfactual_e2e_s = counterfactual_latencies(rid, now);
    }
    probes_.push_back(std::move(probe));
  } else {
    decision = dispatcher_.dispatch(candidate, snapshots, predictor_.get());
  }

  point.instance_id = decision.instance_id;
  dispatch_points_.push_back(point);
  qpm_.record_dispatch(decision.instance_id, now);

  if (spec_.provision.kind == ProvisionKind::kPreempt) {
    double predicted = 0;
    auto it = decision.predictions.find(decision.instance_id);
    if (it != decision.predictions.end()) {
      predicted = it->second.e2e();
    } else {
      // Heuristic policies do not carry predictions; ask for one.
      PredictionRequest request;
      request.snapshot = snapshots[static_cast<std::size_t>(decision.instance_id)];
      request.candidate = candidate;
      request.instance_config = instance_config_for(spec_.instance_template, decision.instance_id);
      predicted = predict(request, cache_.get()).e2e();
    }
    maybe_provision(ProvisionSignal::kPredictedLatency, predicted, now);
  }

  if (spec_.dispatch_overhead_s == 0) {
    admit_to_instance(rid, decision.instance_id, now);
  } else {
    engine_.push(EventKind::kDispatch, now + SimTime::from_seconds(spec_.dispatch_overhead_s), rid,
                 static_cast<std::uint64_t>(decision.instance_id));
  }
}

void SimulationDriver::handle_dispatch(RequestId rid, InstanceId iid) {
  admit_to_instance(rid, iid, engine_.now());
}

void SimulationDriver::admit_to_instance(RequestId rid, InstanceId iid, SimTime now) {
  Request& r = requests_[rid];
  instances_[static_cast<std::size_t>(iid)].admit(rid, r.prompt_tokens, r.true_output_tokens,
                                                  r.estimated_output_tokens);
  r.dispatch_time = now;
  r.state = RequestState::kWaiting;
}

void SimulationDriver::handle_batch_complete(InstanceId iid) {
  const SimTime now = engine_.now();
  Instance& inst = instances_[static_cast<std::size_t>(iid)];
  const StepFinish finish = inst.finish_step();
  for (const RequestId id : finish.first_tokens) {
    Request& r = requests_[id];
    if (!r.first_token_time) r.first_token_time = now;
  }
  for (const RequestId id : finish.completed) {
    Request& r = requests_[id];
    r.finish_time = now;
    r.state = RequestState::kFinished;
    r.decoded_tokens = r.true_output_tokens;
    r.prefill_progress = r.prompt_tokens;
    if (spec_.provision.kind == ProvisionKind::kRelief) {
      maybe_provision(ProvisionSignal::kRealizedLatency, (now - r.arrival_time).seconds(), now);
    }
  }
}

void SimulationDriver::maybe_provision(ProvisionSignal signal, double latency_s, SimTime now) {
  if (!autoscaler_.evaluate(signal, latency_s, now)) return;
  const InstanceId new_id = next_instance_id_++;
  engine_.push(EventKind::kProvisionComplete,
               now + SimTime::from_seconds(spec_.provision.cold_start_s),
               static_cast<std::uint64_t>(new_id));
  BLOCKSIM_LOG_INFO << "provisioning instance " << new_id << " at t=" << now.to_string()
                    << " (signal " << latency_s << "s)";
}

void SimulationDriver::handle_provision_complete(InstanceId iid) {
  if (static_cast<std::size_t>(iid) < instances_.size()) {
    throw DuplicateInstanceError("instance " + std::to_string(iid) + " already exists");
  }
  instances_.emplace_back(instance_config_for(spec_.instance_template, iid));
  autoscaler_.on_provision_complete();
}

void SimulationDriver::end_of_instant(SimTime now) {
  for (Instance& inst : instances_) {
    if (inst.mid_step() || !inst.has_work()) continue;
    const StepBegin begin = inst.begin_step();
    engine_.push(EventKind::kBatchComplete, now + begin.duration,
                 static_cast<std::uint64_t>(inst.config().instance_id));
    for (const RequestId id : begin.preempted) {
      requests_[id].state = RequestState::kPreempted;
      preempt_counts_[id] += 1;
      cum_preemptions_ += 1;
    }
    for (const RequestId id : begin.plan.decode_ids) {
      requests_[id].state = RequestState::kRunning;
    }
    for (const auto& [id, chunk] : begin.plan.prefill_segments) {
      requests_[id].state = RequestState::kRunning;
    }
  }
}

RunLog SimulationDriver::assemble_log() {
  RunLog log;
  log.requests = requests_;
  log.preempt_counts = preempt_counts_;
  log.dispatch_points = dispatch_points_;
  log.probes = probes_;
  if (spec_.collect_events) log.events = engine_.log();
  log.fallback_dispatches = dispatcher_.fallback_count();
  log.total_preemptions = cum_preemptions_;
  log.instances_provisioned = autoscaler_.provisioned_total();
  log.final_instance_count = static_cast<int>(instances_.size());
  log.end_time = engine_.now();
  log.overhead_const_s = spec_.dispatch_overhead_s;
  return log;
}

RunLog SimulationDriver::run() {
  std::optional<SimTime> deadline;
  if (spec_.workload.duration_cap_s) {
    deadline = SimTime::from_seconds(*spec_.workload.duration_cap_s);
  }
  engine_.run_until(deadline, *this);
  return assemble_log();
}

RunLog run_experiment(const ExperimentSpec& spec) {
  SimulationDriver driver(spec);
  return driver.run();
}

ExperimentSpec spec_for_cell(const ExperimentSpec& base, PolicyKind policy, double qps,
                             std::uint64_t seed) {
  ExperimentSpec spec = base;
  spec.policy.kind = policy;
  spec.policy.seed = seed;
  spec.workload.qps = qps;
  spec.workload.seed = seed;
  spec.workload.estimator.seed = seed;
  spec.probe.seed = seed;
  return spec;
}

std::vector<SweepCell> run_sweep(const ExperimentSpec& base, const SweepSpec& sweep) {
  struct CellSpec {
    PolicyKind policy;
    double qps;
    std::uint64_t seed;
  };
  std::vector<CellSpec> cells;
  for (const PolicyKind policy : sweep.policies) {
    for (const double qps : sweep.qps_values) {
      for (const std::uint64_t seed : sweep.seeds) {
        cells.push_back({policy, qps, seed});
      }
    }
  }

  std::vector<SweepCell> results(cells.size());
  auto run_cell = [&](std::size_t index) {
    const CellSpec& cell = cells[index];
    SweepCell& out = results[index];
    out.policy = cell.policy;
    out.qps = cell.qps;
    out.seed = cell.seed;
    try {
      ExperimentSpec spec = spec_for_cell(base, cell.policy, cell.qps, cell.seed);
      spec.collect_events = false;
      const RunLog log = run_experiment(spec);
      const RunReport report = aggregate(log);
      out.ok = true;
      out.mean_ttft_s = report.mean_ttft_s;
      out.p99_ttft_s = report.p99_ttft_s;
      out.mean_e2e_s = report.mean_e2e_s;
      out.p99_e2e_s = report.p99_e2e_s;
      out.throughput_rps = report.throughput_rps;
      out.total_preemptions = report.total_preemptions;
      out.finished_requests = report.finished_requests;
      out.free_blocks_var_avg = report.free_blocks_var_avg;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  const int jobs = std::max(1, sweep.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::future<void>> inflight;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (static_cast<int>(inflight.size()) >= jobs) {
        inflight.front().get();
        inflight.erase(inflight.begin());
      }
      inflight.push_back(std::async(std::launch::async, run_cell, i));
    }
    for (auto& f : inflight) f.get();
  }
  return results;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
  return buf;
}

CapacityTable run_capacity(const ExperimentSpec& base, const CapacitySpec& capacity) {
  CapacityTable table;
  table.baseline = capacity.baseline;

  std::vector<PolicyKind> policies = capacity.policies;
  if (std::find(policies.begin(), policies.end(), capacity.baseline) == policies.end()) {
    policies.push_back(capacity.baseline);
  }

  const SloSpec slo{capacity.slo_p99_ttft_s};
  for (const PolicyKind policy : policies) {
    auto runner = [&](double qps) {
      ExperimentSpec spec = spec_for_cell(base, policy, qps, capacity.seed);
      spec.collect_events = false;
      const RunLog log = run_experiment(spec);
      return aggregate(log);
    };
    CapacityTableRow row{policy, capacity_search(runner, slo, capacity.qps_min, capacity.qps_max)};
    if (policy == capacity.baseline) table.baseline_capacity = row.result.capacity_qps;
    table.rows.push_back(std::move(row));
  }

  for (const CapacityTableRow& row : table.rows) {
    if (row.policy == capacity.baseline || table.baseline_capacity <= 0) continue;
    const double gain =
        (row.result.capacity_qps - table.baseline_capacity) / table.baseline_capacity;
    table.gains.emplace_back(to_string(row.policy), format_percent(gain));
  }
  return table;
}

}  // namespace blocksim
