#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "blocksim/config.h"
#include "blocksim/driver.h"
#include "blocksim/error.h"
#include "blocksim/log.h"
#include "blocksim/metrics.h"
#include "blocksim/report_io.h"
#include "blocksim/service.h"
#include "blocksim/workload.h"
#include "convert_trace.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitSimulationFailure = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::int64_t> seed;
  std::string policy;
  std::optional<double> qps;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* config = cmd->add_option("--config", args.config_path, "Experiment config file");
  if (config_required) config->required();
  cmd->add_option("--out", args.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", args.seed, "Workload/scheduler seed override");
  cmd->add_option("--policy", args.policy, "Scheduler policy override");
  cmd->add_option("--qps", args.qps, "Arrival rate override");
}

blocksim::KvConfig load_config(const CommonArgs& args) {
  blocksim::KvConfig config = blocksim::KvConfig::parse_file(args.config_path);
  if (args.seed) {
    const std::string seed = std::to_string(*args.seed);
    config.set("workload.seed", seed);
    config.set("scheduler.seed", seed);
    config.set("estimator.seed", seed);
    config.set("probe.seed", seed);
  }
  if (!args.policy.empty()) config.set("scheduler.policy", args.policy);
  if (args.qps) config.set("workload.qps", std::to_string(*args.qps));
  return config;
}

std::string resolve_out_dir(const CommonArgs& args, const blocksim::KvConfig& config) {
  if (!args.out_dir.empty()) return args.out_dir;
  return config.get_str("output.dir", "out");
}

void require_workload(const blocksim::ExperimentSpec& spec) {
  if (spec.workload.records.empty()) {
    throw blocksim::ConfigError("workload.trace", "a non-empty trace is required");
  }
}

int cmd_run(const CommonArgs& args) {
  const blocksim::KvConfig config = load_config(args);
  const blocksim::ExperimentSpec spec = blocksim::load_experiment_spec(config);
  require_workload(spec);
  const std::string out_dir = resolve_out_dir(args, config);

  const blocksim::RunLog log = blocksim::run_experiment(spec);
  const blocksim::RunReport report = blocksim::aggregate(log);
  blocksim::write_run_report(out_dir, report, log, spec.smooth_sigma);

  std::printf("finished=%d censored=%d mean_ttft=%.4fs p99_ttft=%.4fs mean_e2e=%.4fs\n",
              report.finished_requests, report.censored_requests, report.mean_ttft_s,
              report.p99_ttft_s, report.mean_e2e_s);
  std::printf("reports written to %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, int jobs_override) {
  const blocksim::KvConfig config = load_config(args);
  const blocksim::ExperimentSpec base = blocksim::load_experiment_spec(config);
  require_workload(base);
  blocksim::SweepSpec sweep = blocksim::load_sweep_spec(config);
  if (jobs_override > 0) sweep.jobs = jobs_override;
  const std::string out_dir = resolve_out_dir(args, config);

  const auto cells = blocksim::run_sweep(base, sweep);
  blocksim::write_sweep_summary(out_dir, cells);

  int failures = 0;
  for (const auto& cell : cells) {
    if (!cell.ok) {
      ++failures;
      std::fprintf(stderr, "cell %s qps=%.1f seed=%llu failed: %s\n",
                   blocksim::to_string(cell.policy), cell.qps,
                   static_cast<unsigned long long>(cell.seed), cell.error.c_str());
    }
  }
  std::printf("%zu cells (%d failed); summary in %s/sweep_summary.csv\n", cells.size(), failures,
              out_dir.c_str());
  return kExitOk;
}

int cmd_capacity(const CommonArgs& args) {
  const blocksim::KvConfig config = load_config(args);
  const blocksim::ExperimentSpec base = blocksim::load_experiment_spec(config);
  require_workload(base);
  const blocksim::CapacitySpec capacity = blocksim::load_capacity_spec(config);
  const std::string out_dir = resolve_out_dir(args, config);

  const blocksim::CapacityTable table = blocksim::run_capacity(base, capacity);
  blocksim::write_capacity_table(out_dir, table);
  for (const auto& row : table.rows) {
    std::printf("%s capacity = %.1f qps%s\n", blocksim::to_string(row.policy),
                row.result.capacity_qps, row.result.monotone ? "" : " (non-monotone sweep)");
  }
  for (const auto& [policy, gain] : table.gains) {
    std::printf("gain %s vs %s = %s\n", policy.c_str(), blocksim::to_string(table.baseline),
                gain.c_str());
  }
  return kExitOk;
}

int cmd_serve(const CommonArgs& args, const std::string& role) {
  const blocksim::KvConfig config = load_config(args);
  const blocksim::ExperimentSpec spec = blocksim::load_experiment_spec(config);
  const blocksim::ServeSpec serve = blocksim::load_serve_spec(config);
  return blocksim::serve_role(role, spec, serve);
}

int cmd_convert(const std::string& format, const std::string& input, const std::string& output,
                double chars_per_token) {
  const std::string text = blocksim::read_file(input);
  std::vector<blocksim::TraceRecord> records;
  if (format == "sharegpt") {
    records = blocksim::convert_sharegpt(text, chars_per_token);
  } else if (format == "burstgpt") {
    records = blocksim::convert_burstgpt(text);
  } else {
    throw blocksim::ConfigError("--format", "must be sharegpt or burstgpt");
  }
  blocksim::write_trace_file(output, records);
  std::printf("wrote %zu records to %s\n", records.size(), output.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blocksim: simulation-driven scheduling for multi-instance LLM serving"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its reports");
  add_common(run_cmd, run_args);

  CommonArgs sweep_args;
  int sweep_jobs = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a (policy, qps, seed) grid");
  add_common(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--jobs", sweep_jobs, "Concurrent sweep cells");

  CommonArgs capacity_args;
  auto* capacity_cmd =
      app.add_subcommand("capacity", "Search the max QPS meeting the TTFT P99 SLO per policy");
  add_common(capacity_cmd, capacity_args);

  CommonArgs serve_args;
  std::string serve_role_name;
  auto* serve_cmd = app.add_subcommand("serve", "Run one service role (backend|predictor|scheduler)");
  serve_cmd->add_option("role", serve_role_name, "backend, predictor, or scheduler")->required();
  add_common(serve_cmd, serve_args);

  std::string convert_format, convert_input, convert_output;
  double chars_per_token = 4.0;
  auto* convert_cmd =
      app.add_subcommand("convert-trace", "Convert external dumps into the JSONL trace format");
  convert_cmd->add_option("--format", convert_format, "sharegpt or burstgpt")->required();
  convert_cmd->add_option("--input", convert_input, "Input file")->required();
  convert_cmd->add_option("--output", convert_output, "Output JSONL trace")->required();
  convert_cmd->add_option("--chars-per-token", chars_per_token,
                          "Token approximation for raw conversation text");

  blocksim::SyntheticTraceSpec trace_spec;
  std::string make_output;
  auto* make_cmd = app.add_subcommand("make-trace", "Generate a synthetic heavy-tail trace");
  make_cmd->add_option("--requests", trace_spec.count, "Number of records");
  make_cmd->add_option("--seed", trace_spec.seed, "Generator seed");
  make_cmd->add_option("--prompt-median", trace_spec.prompt_median, "Median prompt tokens");
  make_cmd->add_option("--prompt-sigma", trace_spec.prompt_sigma, "Prompt lognormal sigma");
  make_cmd->add_option("--output-median", trace_spec.output_median, "Median output tokens");
  make_cmd->add_option("--output-sigma", trace_spec.output_sigma, "Output lognormal sigma");
  make_cmd->add_option("--max-output", trace_spec.max_output_tokens, "Output token cap");
  make_cmd->add_option("--output", make_output, "Output JSONL trace")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_jobs);
    if (capacity_cmd->parsed()) return cmd_capacity(capacity_args);
    if (serve_cmd->parsed()) return cmd_serve(serve_args, serve_role_name);
    if (convert_cmd->parsed()) {
      return cmd_convert(convert_format, convert_input, convert_output, chars_per_token);
    }
    if (make_cmd->parsed()) {
      blocksim::write_trace_file(make_output, blocksim::make_synthetic_trace(trace_spec));
      std::printf("wrote %d records to %s\n", trace_spec.count, make_output.c_str());
      return kExitOk;
    }
  } catch (const blocksim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const blocksim::TraceParseError& e) {
    std::fprintf(stderr, "trace error: %s\n", e.what());
    return kExitConfigError;
  } catch (const blocksim::InvalidRecordError& e) {
    std::fprintf(stderr, "trace error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "simulation failure: %s\n", e.what());
    return kExitSimulationFailure;
  }
  return kExitOk;
}
