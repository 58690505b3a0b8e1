#include "blocksim/report_io.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blocksim/error.h"

namespace blocksim {

namespace {

std::string fixed9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", value);
  return buf;
}

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_run_report(const std::string& dir, const RunReport& report, const RunLog& log,
                      double smooth_sigma) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);

  {
    auto out = open_out(base / "summary.txt");
    out << "finished_requests = " << report.finished_requests << '\n';
    out << "censored_requests = " << report.censored_requests << '\n';
    out << "throughput_rps = " << fixed6(report.throughput_rps) << '\n';
    out << "mean_ttft_s = " << fixed9(report.mean_ttft_s) << '\n';
    out << "p50_ttft_s = " << fixed9(report.p50_ttft_s) << '\n';
    out << "p99_ttft_s = " << fixed9(report.p99_ttft_s) << '\n';
    out << "mean_e2e_s = " << fixed9(report.mean_e2e_s) << '\n';
    out << "p50_e2e_s = " << fixed9(report.p50_e2e_s) << '\n';
    out << "p99_e2e_s = " << fixed9(report.p99_e2e_s) << '\n';
    out << "mean_overhead_s = " << fixed9(report.mean_overhead_s) << '\n';
    out << "total_preemptions = " << report.total_preemptions << '\n';
    out << "fallback_dispatches = " << report.fallback_dispatches << '\n';
    out << "instances_provisioned = " << report.instances_provisioned << '\n';
    out << "final_instance_count = " << report.final_instance_count << '\n';
    out << "free_blocks_mean_avg = " << fixed6(report.free_blocks_mean_avg) << '\n';
    out << "free_blocks_var_avg = " << fixed6(report.free_blocks_var_avg) << '\n';
    out << "probe_count = " << report.probe_rows.size() << '\n';
    out << "end_time_s = " << log.end_time.to_string() << '\n';
  }

  {
    auto out = open_out(base / "requests.csv");
    out << "id,arrival_s,dispatch_s,first_token_s,finish_s,ttft_s,e2e_s,overhead_s,"
           "preempt_count,censored\n";
    for (const RequestRow& row : report.request_rows) {
      out << row.id << ',' << fixed9(row.arrival_s) << ',' << fixed9(row.dispatch_s) << ','
          << fixed9(row.first_token_s) << ',' << fixed9(row.finish_s) << ',' << fixed9(row.ttft_s)
          << ',' << fixed9(row.e2e_s) << ',' << fixed9(row.overhead_s) << ',' << row.preempt_count
          << ',' << (row.censored ? 1 : 0) << '\n';
    }
  }

  {
    auto out = open_out(base / "timeseries.csv");
    out << "time_s,request_id,instance_id,free_blocks_mean,free_blocks_var,"
           "cumulative_preemptions\n";
    for (const auto& point : report.timeseries) {
      out << point.time.to_string() << ',' << point.request_id << ',' << point.instance_id << ','
          << fixed6(point.free_blocks_mean) << ',' << fixed6(point.free_blocks_var) << ','
          << point.cumulative_preemptions << '\n';
    }
  }

  if (smooth_sigma > 0 && !report.timeseries.empty()) {
    std::vector<double> means, vars;
    for (const auto& point : report.timeseries) {
      means.push_back(point.free_blocks_mean);
      vars.push_back(point.free_blocks_var);
    }
    const std::vector<double> smooth_means = smooth(means, smooth_sigma);
    const std::vector<double> smooth_vars = smooth(vars, smooth_sigma);
    auto out = open_out(base / "timeseries_smoothed.csv");
    out << "time_s,free_blocks_mean,free_blocks_var\n";
    for (std::size_t i = 0; i < report.timeseries.size(); ++i) {
      out << report.timeseries[i].time.to_string() << ',' << fixed6(smooth_means[i]) << ','
          << fixed6(smooth_vars[i]) << '\n';
    }
  }

  {
    auto out = open_out(base / "probes.csv");
    out << "request_id,selected_instance,realized_e2e_s,realized_ttft_s,predicted_rank,"
           "counterfactual_rank,censored\n";
    for (const ProbeReportRow& row : report.probe_rows) {
      out << row.request_id << ',' << row.selected_instance << ',' << fixed9(row.realized_e2e_s)
          << ',' << fixed9(row.realized_ttft_s) << ',' << row.predicted_rank << ','
          << row.counterfactual_rank << ',' << (row.censored ? 1 : 0) << '\n';
    }
  }

  {
    auto out = open_out(base / "probe_predictions.csv");
    out << "request_id,instance_id,predicted_e2e_s,predicted_ttft_s,selected\n";
    for (const RunLog::ProbeRow& probe : log.probes) {
      for (const auto& [iid, prediction] : probe.predictions) {
        out << probe.request_id << ',' << iid << ',' << fixed9(prediction.e2e()) << ','
            << fixed9(prediction.ttft()) << ',' << (iid == probe.selected_instance ? 1 : 0)
            << '\n';
      }
    }
  }

  if (!log.events.empty()) {
    auto out = open_out(base / "events.log");
    for (const Event& e : log.events) {
      out << e.fire_time.to_string() << ' ' << to_string(e.kind) << ' ' << e.a << ' ' << e.b
          << '\n';
    }
  }
}

void write_sweep_summary(const std::string& dir, const std::vector<SweepCell>& cells) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  auto out = open_out(base / "sweep_summary.csv");
  out << "policy,qps,seed,ok,error,mean_ttft_s,p99_ttft_s,mean_e2e_s,p99_e2e_s,"
         "throughput_rps,total_preemptions,finished_requests\n";
  for (const SweepCell& cell : cells) {
    std::string error = cell.error;
    for (char& c : error) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << to_string(cell.policy) << ',' << fixed6(cell.qps) << ',' << cell.seed << ','
        << (cell.ok ? 1 : 0) << ',' << error << ',' << fixed9(cell.mean_ttft_s) << ','
        << fixed9(cell.p99_ttft_s) << ',' << fixed9(cell.mean_e2e_s) << ','
        << fixed9(cell.p99_e2e_s) << ',' << fixed6(cell.throughput_rps) << ','
        << cell.total_preemptions << ',' << cell.finished_requests << '\n';
  }
}

void write_capacity_table(const std::string& dir, const CapacityTable& table) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  auto out = open_out(base / "capacity.txt");
  for (const CapacityTableRow& row : table.rows) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", row.result.capacity_qps);
    out << to_string(row.policy) << " = " << buf;
    if (!row.result.monotone) out << "  # non-monotone sweep, bracket reported";
    out << '\n';
  }
  for (const auto& [policy, gain] : table.gains) {
    out << "gain " << policy << " vs " << to_string(table.baseline) << " = " << gain << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace blocksim
