#include "blocksim/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "blocksim/error.h"
#include "blocksim/log.h"

namespace blocksim {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig config;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_number), "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_number), "empty key");
    }
    config.entries_[key] = value;
  }
  return config;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::string KvConfig::require_str(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(key, "required key is missing");
  return it->second;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::int64_t value = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError(key, "'" + it->second + "' is not an integer");
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double value = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError(key, "'" + it->second + "' is not a number");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key, "'" + v + "' is not a boolean");
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  std::vector<std::string> items;
  auto it = entries_.find(key);
  if (it == entries_.end()) return items;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

void KvConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

ExperimentSpec load_experiment_spec(const KvConfig& config) {
  ExperimentSpec spec;

  spec.initial_instances = static_cast<int>(config.get_int("cluster.instances", 1));
  if (spec.initial_instances < 1) throw ConfigError("cluster.instances", "must be >= 1");

  InstanceConfig& inst = spec.instance_template;
  inst.total_blocks = static_cast<int>(config.get_int("cluster.total_blocks", 1056));
  inst.block_size = static_cast<int>(config.get_int("cluster.block_size", 16));
  inst.max_batch_size = static_cast<int>(config.get_int("cluster.max_batch_size", 48));
  inst.chunk_budget = static_cast<int>(config.get_int("cluster.chunk_budget", 512));
  inst.local_policy = parse_local_policy(config.get_str("cluster.local_policy", "chunked_prefill"));
  inst.cost_model.c0_s = config.get_double("cost.c0_s", 0.01);
  inst.cost_model.prefill_s_per_token = config.get_double("cost.prefill_s_per_token", 1e-4);
  inst.cost_model.decode_s_per_seq = config.get_double("cost.decode_s_per_seq", 1e-3);
  inst.cost_model.context_s_per_token = config.get_double("cost.context_s_per_token", 1e-7);
  validate_instance_config(inst);

  spec.policy.kind = parse_policy(config.get_str("scheduler.policy", "round_robin"));
  spec.policy.seed = static_cast<std::uint64_t>(config.get_int("scheduler.seed", 0));
  const std::string objective = config.get_str("scheduler.objective", "e2e");
  if (objective == "e2e") {
    spec.policy.objective = LatencyObjective::kE2e;
  } else if (objective == "ttft") {
    spec.policy.objective = LatencyObjective::kTtft;
  } else {
    throw ConfigError("scheduler.objective", "must be e2e or ttft");
  }

  // The trace is optional here so service roles can share the config
  // format; the run/sweep/capacity entry points insist on one.
  spec.workload.trace_path = config.get_str("workload.trace", "");
  if (!spec.workload.trace_path.empty()) {
    spec.workload.records = load_trace_file(spec.workload.trace_path);
  }
  spec.workload.qps = config.get_double("workload.qps", 1.0);
  spec.workload.seed = static_cast<std::uint64_t>(config.get_int("workload.seed", 0));
  if (config.has("workload.request_cap")) {
    spec.workload.request_cap = static_cast<int>(config.get_int("workload.request_cap", 0));
  }
  if (config.has("workload.duration_cap_s")) {
    spec.workload.duration_cap_s = config.get_double("workload.duration_cap_s", 0);
  }
  spec.workload.estimator.kind = parse_estimator_kind(config.get_str("estimator.kind", "oracle"));
  spec.workload.estimator.fixed_tokens =
      static_cast<TokenCount>(config.get_int("estimator.fixed_tokens", 256));
  spec.workload.estimator.mean_abs_rel_error =
      config.get_double("estimator.mean_abs_rel_error", 0.244);
  spec.workload.estimator.seed = static_cast<std::uint64_t>(config.get_int("estimator.seed", 0));

  spec.provision.kind = parse_provision_kind(config.get_str("provision.kind", "static"));
  spec.provision.threshold_s = config.get_double("provision.threshold_s", 70.0);
  spec.provision.cold_start_s = config.get_double("provision.cold_start_s", 30.0);
  spec.provision.cooldown_s = config.get_double("provision.cooldown_s", 15.0);
  spec.provision.min_instances =
      static_cast<int>(config.get_int("provision.min_instances", spec.initial_instances));
  spec.provision.max_instances =
      static_cast<int>(config.get_int("provision.max_instances", spec.initial_instances));
  validate_provision_policy(spec.provision);
  if (spec.provision.max_instances < spec.initial_instances) {
    throw ConfigError("provision.max_instances", "must be >= cluster.instances");
  }

  spec.probe.probability = config.get_double("probe.probability", 0.0);
  if (spec.probe.probability < 0 || spec.probe.probability > 1) {
    throw ConfigError("probe.probability", "must be in [0, 1]");
  }
  spec.probe.seed = static_cast<std::uint64_t>(config.get_int("probe.seed", 0));
  spec.probe.counterfactual = config.get_bool("probe.counterfactual", false);

  spec.dispatch_overhead_s = config.get_double("overhead.dispatch_s", 0.0);
  if (spec.dispatch_overhead_s < 0) throw ConfigError("overhead.dispatch_s", "must be >= 0");

  spec.cache_mode = parse_cache_mode(config.get_str("predictor.cache", "exact"));
  spec.cache_bucket = static_cast<TokenCount>(config.get_int("predictor.context_bucket", 256));
  spec.collect_events = config.get_bool("output.events", true);
  spec.smooth_sigma = config.get_double("output.smooth_sigma", 0.0);

  // Workload must be servable at all: reject requests that could never fit
  // even on an empty instance.
  for (const TraceRecord& r : spec.workload.records) {
    if (blocks_needed(static_cast<std::int64_t>(r.prompt_tokens) + r.output_tokens,
                      inst.block_size) > inst.total_blocks) {
      throw ConfigError("workload.trace", "record " + std::to_string(r.id) +
                                              " can never fit on an instance");
    }
  }
  return spec;
}

SweepSpec load_sweep_spec(const KvConfig& config) {
  SweepSpec spec;
  for (const std::string& name : config.get_list("sweep.policies")) {
    spec.policies.push_back(parse_policy(name));
  }
  if (spec.policies.empty()) {
    spec.policies.push_back(parse_policy(config.get_str("scheduler.policy", "round_robin")));
  }
  for (const std::string& value : config.get_list("sweep.qps")) {
    spec.qps_values.push_back(std::stod(value));
  }
  if (spec.qps_values.empty()) spec.qps_values.push_back(config.get_double("workload.qps", 1.0));
  for (const std::string& value : config.get_list("sweep.seeds")) {
    spec.seeds.push_back(static_cast<std::uint64_t>(std::stoll(value)));
  }
  if (spec.seeds.empty()) {
    spec.seeds.push_back(static_cast<std::uint64_t>(config.get_int("workload.seed", 0)));
  }
  spec.jobs = static_cast<int>(config.get_int("sweep.jobs", 1));
  if (spec.jobs < 1) throw ConfigError("sweep.jobs", "must be >= 1");
  return spec;
}

CapacitySpec load_capacity_spec(const KvConfig& config) {
  CapacitySpec spec;
  for (const std::string& name : config.get_list("capacity.policies")) {
    spec.policies.push_back(parse_policy(name));
  }
  if (spec.policies.empty()) {
    spec.policies.push_back(parse_policy(config.get_str("scheduler.policy", "block_predictive")));
  }
  spec.baseline = parse_policy(config.get_str("capacity.baseline", "llumnix_minus"));
  spec.qps_min = static_cast<int>(config.get_int("capacity.qps_min", 1));
  spec.qps_max = static_cast<int>(config.get_int("capacity.qps_max", 64));
  if (spec.qps_min < 1 || spec.qps_min > spec.qps_max) {
    throw ConfigError("capacity.qps_min", "need 1 <= qps_min <= qps_max");
  }
  spec.slo_p99_ttft_s = config.get_double("capacity.slo_p99_ttft_s", 3.0);
  if (!(spec.slo_p99_ttft_s > 0)) throw ConfigError("capacity.slo_p99_ttft_s", "must be > 0");
  spec.seed = static_cast<std::uint64_t>(config.get_int("workload.seed", 0));
  return spec;
}

ServeSpec load_serve_spec(const KvConfig& config) {
  ServeSpec spec;
  const std::string listen = config.get_str("serve.listen", "127.0.0.1:8080");
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("serve.listen", "expected host:port");
  spec.listen_host = listen.substr(0, colon);
  try {
    spec.listen_port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("serve.listen", "bad port in '" + listen + "'");
  }
  spec.backends = config.get_list("serve.backends");
  spec.predictor_address = config.get_str("serve.predictor", "");
  spec.instance_id = static_cast<InstanceId>(config.get_int("serve.instance_id", 0));
  spec.pacing_ms = static_cast<int>(config.get_int("serve.pacing_ms", 10));
  if (spec.pacing_ms < 1) throw ConfigError("serve.pacing_ms", "must be >= 1");
  spec.fallback_on_predictor_timeout = config.get_bool("serve.fallback", true);
  spec.predictor_timeout_ms = static_cast<int>(config.get_int("serve.predictor_timeout_ms", 1000));
  return spec;
}

}  // namespace blocksim
