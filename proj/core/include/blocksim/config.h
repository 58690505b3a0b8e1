#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blocksim/autoscaler.h"
#include "blocksim/predictor.h"
#include "blocksim/scheduler.h"
#include "blocksim/types.h"
#include "blocksim/workload.h"

namespace blocksim {

// Dotted key=value tree: one "<section>.<key> = <value>" per line,
// '#' starts a comment. Later assignments win.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);
  static KvConfig parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list value.
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct WorkloadSpec {
  std::string trace_path;
  std::vector<TraceRecord> records;  // loaded from trace_path
  double qps = 1.0;
  std::uint64_t seed = 0;
  std::optional<int> request_cap;
  std::optional<double> duration_cap_s;
  LengthEstimator estimator;
};

struct ProbeSpec {
  double probability = 0;
  std::uint64_t seed = 0;
  bool counterfactual = false;
};

// Everything one simulation run needs; built from a KvConfig with every
// seed explicit.
struct ExperimentSpec {
  int initial_instances = 1;
  InstanceConfig instance_template;
  PolicyConfig policy;
  WorkloadSpec workload;
  ProvisionPolicy provision;
  ProbeSpec probe;
  double dispatch_overhead_s = 0;
  CacheMode cache_mode = CacheMode::kExact;
  TokenCount cache_bucket = 256;
  bool collect_events = true;
  double smooth_sigma = 0;
};

struct SweepSpec {
  std::vector<PolicyKind> policies;
  std::vector<double> qps_values;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

struct CapacitySpec {
  std::vector<PolicyKind> policies;
  PolicyKind baseline = PolicyKind::kLlumnixMinus;
  int qps_min = 1;
  int qps_max = 64;
  double slo_p99_ttft_s = 3.0;
  std::uint64_t seed = 0;
};

struct ServeSpec {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::vector<std::string> backends;    // host:port per backend service
  std::string predictor_address;        // host:port
  InstanceId instance_id = 0;           // backend role
  int pacing_ms = 10;                   // backend simulated-clock quantum
  bool fallback_on_predictor_timeout = true;
  int predictor_timeout_ms = 1000;
};

// Throws ConfigError on invalid or missing values; flags unknown keys.
ExperimentSpec load_experiment_spec(const KvConfig& config);
SweepSpec load_sweep_spec(const KvConfig& config);
CapacitySpec load_capacity_spec(const KvConfig& config);
ServeSpec load_serve_spec(const KvConfig& config);

}  // namespace blocksim
