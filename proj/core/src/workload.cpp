#include "blocksim/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "blocksim/error.h"
#include "blocksim/rand.h"

namespace blocksim {

using nlohmann::json;

namespace {

TraceRecord record_from_json(const json& j, int line_number) {
  TraceRecord r;
  try {
    r.id = j.at("id").get<std::uint64_t>();
    r.prompt_tokens = j.at("prompt_tokens").get<TokenCount>();
    r.output_tokens = j.at("output_tokens").get<TokenCount>();
    if (j.contains("estimated_output_tokens")) {
      r.estimated_output_tokens = j.at("estimated_output_tokens").get<TokenCount>();
    }
    if (j.contains("arrival_offset_s")) {
      r.arrival_offset_s = j.at("arrival_offset_s").get<double>();
    }
  } catch (const json::exception& e) {
    throw TraceParseError(line_number, e.what());
  }
  return r;
}

void validate_record(const TraceRecord& r) {
  if (r.prompt_tokens < 1) throw InvalidRecordError("prompt_tokens", "must be >= 1");
  if (r.output_tokens < 1) throw InvalidRecordError("output_tokens", "must be >= 1");
  if (r.estimated_output_tokens && *r.estimated_output_tokens < 1) {
    throw InvalidRecordError("estimated_output_tokens", "must be >= 1");
  }
  if (r.arrival_offset_s && *r.arrival_offset_s < 0) {
    throw InvalidRecordError("arrival_offset_s", "must be >= 0");
  }
}

}  // namespace

std::vector<TraceRecord> load_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::unordered_set<std::uint64_t> seen_ids;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw TraceParseError(line_number, "malformed JSON");
    TraceRecord r = record_from_json(j, line_number);
    validate_record(r);
    if (!seen_ids.insert(r.id).second) {
      throw InvalidRecordError("id", "duplicate id " + std::to_string(r.id));
    }
    records.push_back(r);
  }
  return records;
}

std::vector<TraceRecord> load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("workload.trace", "cannot open '" + path + "'");
  return load_trace(in);
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const TraceRecord& r : records) {
    json j;
    j["id"] = r.id;
    j["prompt_tokens"] = r.prompt_tokens;
    j["output_tokens"] = r.output_tokens;
    if (r.estimated_output_tokens) j["estimated_output_tokens"] = *r.estimated_output_tokens;
    if (r.arrival_offset_s) j["arrival_offset_s"] = *r.arrival_offset_s;
    out << j.dump() << '\n';
  }
}

void write_trace_file(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("trace", "cannot write '" + path + "'");
  write_trace(out, records);
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kOracle: return "oracle";
    case EstimatorKind::kFixed: return "fixed";
    case EstimatorKind::kNoisy: return "noisy";
    case EstimatorKind::kTrace: return "trace";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "oracle") return EstimatorKind::kOracle;
  if (name == "fixed") return EstimatorKind::kFixed;
  if (name == "noisy") return EstimatorKind::kNoisy;
  if (name == "trace") return EstimatorKind::kTrace;
  throw ConfigError("estimator.kind", "unknown estimator '" + name + "'");
}

TokenCount estimate_length(const LengthEstimator& estimator, const TraceRecord& record) {
  switch (estimator.kind) {
    case EstimatorKind::kOracle:
      return record.output_tokens;
    case EstimatorKind::kFixed:
      return estimator.fixed_tokens;
    case EstimatorKind::kTrace:
      if (!record.estimated_output_tokens) {
        throw InvalidRecordError("estimated_output_tokens",
                                 "trace estimator needs pre-tagged records (record " +
                                     std::to_string(record.id) + " has none)");
      }
      return *record.estimated_output_tokens;
    case EstimatorKind::kNoisy: {
      SplitMix64 rng(mix_seed(estimator.seed, record.id));
      // |e| is half-normal scaled so E|e| matches the target error rate;
      // the sign is a fair coin.
      const double half_normal = std::abs(rng.standard_normal());
      const double sign = (rng.next() & 1) ? 1.0 : -1.0;
      const double scale = estimator.mean_abs_rel_error * std::sqrt(3.14159265358979323846 / 2.0);
      const double error = sign * half_normal * scale;
      const double estimated = std::round(static_cast<double>(record.output_tokens) * (1.0 + error));
      return static_cast<TokenCount>(std::max(1.0, estimated));
    }
  }
  throw Error("unreachable estimator kind");
}

std::vector<Arrival> generate_arrivals(const std::vector<TraceRecord>& records, double qps,
                                       std::uint64_t seed) {
  std::vector<Arrival> arrivals;
  arrivals.reserve(records.size());
  if (records.empty()) return arrivals;

  const bool first_has_offset = records.front().arrival_offset_s.has_value();
  for (const TraceRecord& r : records) {
    if (r.arrival_offset_s.has_value() != first_has_offset) {
      throw InvalidRecordError("arrival_offset_s",
                               "either every record carries an offset or none does");
    }
  }

  if (first_has_offset) {
    for (const TraceRecord& r : records) {
      arrivals.push_back({SimTime::from_seconds(*r.arrival_offset_s), r});
    }
    return arrivals;
  }

  if (!(qps > 0)) throw ConfigError("workload.qps", "must be > 0");
  SplitMix64 rng(seed);
  SimTime t = SimTime::zero();
  for (const TraceRecord& r : records) {
    t += SimTime::from_seconds(rng.exponential(qps));
    arrivals.push_back({t, r});
  }
  return arrivals;
}

std::vector<TraceRecord> make_synthetic_trace(const SyntheticTraceSpec& spec) {
  std::vector<TraceRecord> records;
  records.reserve(spec.count);
  SplitMix64 rng(spec.seed);
  auto lognormal = [&rng](double median, double sigma) {
    return median * std::exp(sigma * rng.standard_normal());
  };
  for (int i = 0; i < spec.count; ++i) {
    TraceRecord r;
    r.id = static_cast<std::uint64_t>(i);
    r.prompt_tokens = static_cast<TokenCount>(std::clamp<double>(
        std::round(lognormal(spec.prompt_median, spec.prompt_sigma)),
        spec.min_tokens, spec.max_prompt_tokens));
    r.output_tokens = static_cast<TokenCount>(std::clamp<double>(
        std::round(lognormal(spec.output_median, spec.output_sigma)),
        spec.min_tokens, spec.max_output_tokens));
    records.push_back(r);
  }
  return records;
}

}  // namespace blocksim
