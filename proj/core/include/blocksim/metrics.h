#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blocksim/event_loop.h"
#include "blocksim/predictor.h"
#include "blocksim/time.h"
#include "blocksim/types.h"

namespace blocksim {

// Everything a completed run leaves behind for post-processing.
struct RunLog {
  std::vector<Request> requests;           // final request states, id-indexed
  std::vector<int> preempt_counts;         // per request, same indexing

  // One row per dispatch decision: cluster memory balance at that moment.
  struct DispatchPoint {
    SimTime time;
    RequestId request_id = 0;
    InstanceId instance_id = 0;
    double free_blocks_mean = 0;
    double free_blocks_var = 0;  // population variance across instances
    std::int64_t cumulative_preemptions = 0;
  };
  std::vector<DispatchPoint> dispatch_points;

  struct ProbeRow {
    RequestId request_id = 0;
    InstanceId selected_instance = 0;
    std::vector<std::pair<InstanceId, PredictionResult>> predictions;
    // Realized candidate latency per instance from forked simulations;
    // empty unless counterfactual probing was enabled.
    std::vector<std::pair<InstanceId, double>> counterfactual_e2e_s;
  };
  std::vector<ProbeRow> probes;

  std::vector<Event> events;
  std::uint64_t fallback_dispatches = 0;
  std::int64_t total_preemptions = 0;
  int instances_provisioned = 0;
  int final_instance_count = 0;
  SimTime end_time;
  double overhead_const_s = 0;
};

struct RequestRow {
  RequestId id = 0;
  double arrival_s = 0;
  double dispatch_s = 0;
  double first_token_s = 0;
  double finish_s = 0;
  double ttft_s = 0;      // first token - dispatch (arrival at the instance)
  double e2e_s = 0;       // finish - client arrival
  double overhead_s = 0;  // dispatch - arrival (the configured constant)
  int preempt_count = 0;
  bool censored = false;  // unfinished when the log ended
};

struct ProbeReportRow {
  RequestId request_id = 0;
  InstanceId selected_instance = 0;
  double realized_e2e_s = 0;
  double realized_ttft_s = 0;
  // Selected instance's realized latency ranked against the other
  // instances' predictions.
  int predicted_rank = 0;
  // Rank among forked-run realized latencies; -1 when not measured.
  int counterfactual_rank = -1;
  bool censored = false;
};

struct RunReport {
  int finished_requests = 0;
  int censored_requests = 0;
  bool incomplete = false;  // some requests never finished

  double throughput_rps = 0;  // finished / (last finish - first arrival)
  double mean_ttft_s = 0, p50_ttft_s = 0, p99_ttft_s = 0;
  double mean_e2e_s = 0, p50_e2e_s = 0, p99_e2e_s = 0;
  double mean_overhead_s = 0;
  std::int64_t total_preemptions = 0;
  std::uint64_t fallback_dispatches = 0;
  int instances_provisioned = 0;
  int final_instance_count = 0;

  double free_blocks_mean_avg = 0;  // time-averaged over dispatch points
  double free_blocks_var_avg = 0;

  std::vector<RequestRow> request_rows;
  std::vector<RunLog::DispatchPoint> timeseries;
  std::vector<ProbeReportRow> probe_rows;
  const RunLog* source = nullptr;  // non-owning, valid while the log lives
};

// Nearest-rank percentile; p in (0, 100]. Sorts a copy.
double percentile_nearest_rank(std::vector<double> values, double p);

// Deterministic post-processing over the log. Unfinished requests are
// reported as censored rows rather than failing the aggregation.
RunReport aggregate(const RunLog& log);

// Seeded Bernoulli per request id; order-independent.
class ProbeSampler {
 public:
  ProbeSampler(double probability, std::uint64_t seed);
  bool sampled(RequestId request_id) const;
  double probability() const { return probability_; }

 private:
  double probability_;
  std::uint64_t seed_;
};

struct SloSpec {
  double p99_ttft_s = 3.0;  // pass iff P99 TTFT < this bound
};

struct CapacityResult {
  double capacity_qps = 0;
  int bracket_pass = 0;  // integer qps that passed
  int bracket_fail = 0;  // bracket_pass + 1 (or beyond the range)
  bool monotone = true;  // integer sweep was pass-prefix/fail-suffix
  std::vector<std::pair<double, bool>> tested;  // (qps, passed) in test order
};

// Integer sweep over [qps_min, qps_max] followed by a 0.1-granularity
// sweep inside the bracketing pair; returns the largest tested qps whose
// report meets the SLO. Throws NoCapacityError when qps_min already fails.
CapacityResult capacity_search(const std::function<RunReport(double)>& runner, const SloSpec& slo,
                               int qps_min, int qps_max);

// Discrete gaussian convolution with symmetric-reflect boundary handling;
// sigma 0 is the identity. Output length equals input length.
std::vector<double> smooth(const std::vector<double>& series, double sigma);

}  // namespace blocksim
