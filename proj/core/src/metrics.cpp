#include "blocksim/metrics.h"

#include <algorithm>
#include <cmath>

#include "blocksim/error.h"
#include "blocksim/rand.h"

namespace blocksim {

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  if (rank < 1) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

RunReport aggregate(const RunLog& log) {
  RunReport report;
  report.source = &log;
  report.total_preemptions = log.total_preemptions;
  report.fallback_dispatches = log.fallback_dispatches;
  report.instances_provisioned = log.instances_provisioned;
  report.final_instance_count = log.final_instance_count;
  report.timeseries = log.dispatch_points;
  report.mean_overhead_s = 0;

  std::vector<double> ttfts, e2es, overheads;
  std::optional<SimTime> first_arrival, last_finish;
  for (std::size_t i = 0; i < log.requests.size(); ++i) {
    const Request& r = log.requests[i];
    RequestRow row;
    row.id = r.id;
    row.arrival_s = r.arrival_time.seconds();
    row.preempt_count = i < log.preempt_counts.size() ? log.preempt_counts[i] : 0;
    if (!first_arrival || r.arrival_time < *first_arrival) first_arrival = r.arrival_time;
    if (r.state == RequestState::kFinished && r.dispatch_time && r.first_token_time &&
        r.finish_time) {
      row.dispatch_s = r.dispatch_time->seconds();
      row.first_token_s = r.first_token_time->seconds();
      row.finish_s = r.finish_time->seconds();
      row.ttft_s = (*r.first_token_time - *r.dispatch_time).seconds();
      row.e2e_s = (*r.finish_time - r.arrival_time).seconds();
      row.overhead_s = (*r.dispatch_time - r.arrival_time).seconds();
      ttfts.push_back(row.ttft_s);
      e2es.push_back(row.e2e_s);
      overheads.push_back(row.overhead_s);
      if (!last_finish || *r.finish_time > *last_finish) last_finish = r.finish_time;
      ++report.finished_requests;
    } else {
      row.censored = true;
      ++report.censored_requests;
    }
    report.request_rows.push_back(row);
  }
  report.incomplete = report.censored_requests > 0;

  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  report.mean_ttft_s = mean(ttfts);
  report.p50_ttft_s = percentile_nearest_rank(ttfts, 50.0);
  report.p99_ttft_s = percentile_nearest_rank(ttfts, 99.0);
  report.mean_e2e_s = mean(e2es);
  report.p50_e2e_s = percentile_nearest_rank(e2es, 50.0);
  report.p99_e2e_s = percentile_nearest_rank(e2es, 99.0);
  report.mean_overhead_s = mean(overheads);
  if (first_arrival && last_finish && *last_finish > *first_arrival &&
      report.finished_requests > 0) {
    report.throughput_rps =
        static_cast<double>(report.finished_requests) / (*last_finish - *first_arrival).seconds();
  }

  std::vector<double> free_means, free_vars;
  for (const auto& point : log.dispatch_points) {
    free_means.push_back(point.free_blocks_mean);
    free_vars.push_back(point.free_blocks_var);
  }
  report.free_blocks_mean_avg = mean(free_means);
  report.free_blocks_var_avg = mean(free_vars);

  for (const RunLog::ProbeRow& probe : log.probes) {
    ProbeReportRow row;
    row.request_id = probe.request_id;
    row.selected_instance = probe.selected_instance;
    const Request& r = log.requests.at(probe.request_id);
    if (r.state == RequestState::kFinished && r.dispatch_time && r.first_token_time &&
        r.finish_time) {
      row.realized_e2e_s = (*r.finish_time - r.arrival_time).seconds();
      row.realized_ttft_s = (*r.first_token_time - *r.dispatch_time).seconds();
      // Join the selected instance's realized outcome against the other
      // instances' predictions and rank it.
      int rank = 1;
      for (const auto& [iid, prediction] : probe.predictions) {
        if (iid == probe.selected_instance) continue;
        if (prediction.e2e() < row.realized_e2e_s) ++rank;
      }
      row.predicted_rank = rank;
    } else {
      row.censored = true;
    }
    if (!probe.counterfactual_e2e_s.empty()) {
      double selected_value = 0;
      for (const auto& [iid, value] : probe.counterfactual_e2e_s) {
        if (iid == probe.selected_instance) selected_value = value;
      }
      int rank = 1;
      for (const auto& [iid, value] : probe.counterfactual_e2e_s) {
        if (iid == probe.selected_instance) continue;
        if (value < selected_value) ++rank;
      }
      row.counterfactual_rank = rank;
    }
    report.probe_rows.push_back(row);
  }

  return report;
}

ProbeSampler::ProbeSampler(double probability, std::uint64_t seed)
    : probability_(probability), seed_(seed) {
  if (probability_ < 0 || probability_ > 1) {
    throw ConfigError("probe.probability", "must be in [0, 1]");
  }
}

bool ProbeSampler::sampled(RequestId request_id) const {
  if (probability_ <= 0) return false;
  SplitMix64 rng(mix_seed(seed_, request_id));
  return rng.uniform01() < probability_;
}

CapacityResult capacity_search(const std::function<RunReport(double)>& runner, const SloSpec& slo,
                               int qps_min, int qps_max) {
  if (qps_min > qps_max) throw ConfigError("capacity.qps", "empty qps range");
  CapacityResult result;
  auto passes = [&](double qps) {
    const RunReport report = runner(qps);
    const bool ok = report.p99_ttft_s < slo.p99_ttft_s;
    result.tested.emplace_back(qps, ok);
    return ok;
  };

  std::vector<bool> integer_pass;
  for (int q = qps_min; q <= qps_max; ++q) integer_pass.push_back(passes(q));
  if (!integer_pass.front()) {
    throw NoCapacityError("qps " + std::to_string(qps_min) + " already violates the SLO");
  }

  // Locate the bracketing pair; flag non-monotone pass patterns instead of
  // silently choosing among them.
  int last_prefix_pass = 0;
  while (last_prefix_pass + 1 < static_cast<int>(integer_pass.size()) &&
         integer_pass[last_prefix_pass + 1]) {
    ++last_prefix_pass;
  }
  for (int i = last_prefix_pass + 1; i < static_cast<int>(integer_pass.size()); ++i) {
    if (integer_pass[i]) result.monotone = false;
  }
  result.bracket_pass = qps_min + last_prefix_pass;
  result.bracket_fail = result.bracket_pass + 1;

  double best = static_cast<double>(result.bracket_pass);
  if (result.bracket_pass < qps_max) {
    for (int tenth = 1; tenth <= 9; ++tenth) {
      const double qps = static_cast<double>(result.bracket_pass * 10 + tenth) / 10.0;
      if (passes(qps)) best = std::max(best, qps);
    }
  }
  result.capacity_qps = best;
  return result;
}

std::vector<double> smooth(const std::vector<double>& series, double sigma) {
  if (sigma < 0) throw ConfigError("smooth.sigma", "must be >= 0");
  if (sigma == 0 || series.empty()) return series;

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double kernel_sum = 0;
  for (int j = -radius; j <= radius; ++j) {
    kernel[j + radius] = std::exp(-0.5 * (j * j) / (sigma * sigma));
    kernel_sum += kernel[j + radius];
  }
  for (double& w : kernel) w /= kernel_sum;

  const int n = static_cast<int>(series.size());
  auto reflect = [n](int i) {
    // Symmetric reflection: (d c b a | a b c d | d c b a).
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };

  std::vector<double> out(series.size());
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int j = -radius; j <= radius; ++j) {
      acc += kernel[j + radius] * series[reflect(i + j)];
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace blocksim
