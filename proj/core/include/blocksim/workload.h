#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blocksim/time.h"
#include "blocksim/types.h"

namespace blocksim {

// One workload entry: token counts only, no text.
struct TraceRecord {
  std::uint64_t id = 0;
  TokenCount prompt_tokens = 0;
  TokenCount output_tokens = 0;
  std::optional<TokenCount> estimated_output_tokens;
  std::optional<double> arrival_offset_s;
};

// Line-delimited records, one JSON object per line with fields id,
// prompt_tokens, output_tokens, optional estimated_output_tokens,
// optional arrival_offset_s. Throws TraceParseError / InvalidRecordError.
std::vector<TraceRecord> load_trace(std::istream& in);
std::vector<TraceRecord> load_trace_file(const std::string& path);
void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
void write_trace_file(const std::string& path, const std::vector<TraceRecord>& records);

enum class EstimatorKind {
  kOracle,  // true output length
  kFixed,   // constant
  kNoisy,   // output scaled by a seeded symmetric relative error
  kTrace,   // pre-tagged estimated_output_tokens from the trace
};

const char* to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

struct LengthEstimator {
  EstimatorKind kind = EstimatorKind::kOracle;
  TokenCount fixed_tokens = 256;
  double mean_abs_rel_error = 0.244;
  std::uint64_t seed = 0;
};

// Pure per record: the noisy draw is keyed by (seed, record id), so the
// result does not depend on evaluation order.
TokenCount estimate_length(const LengthEstimator& estimator, const TraceRecord& record);

struct Arrival {
  SimTime time;
  TraceRecord record;
};

// Poisson arrivals: independent Exponential(qps) gaps, records consumed in
// trace order. When records carry arrival_offset_s (all or none), the
// offsets replace generation and qps/seed are ignored.
std::vector<Arrival> generate_arrivals(const std::vector<TraceRecord>& records, double qps,
                                       std::uint64_t seed);

struct SyntheticTraceSpec {
  int count = 1000;
  std::uint64_t seed = 0;
  // Lognormal prompt and output lengths; the default output sigma gives
  // the heavy tail typical of conversational traces.
  double prompt_median = 230.0;
  double prompt_sigma = 0.7;
  double output_median = 160.0;
  double output_sigma = 1.0;
  TokenCount min_tokens = 4;
  TokenCount max_prompt_tokens = 4096;
  TokenCount max_output_tokens = 8192;
};

std::vector<TraceRecord> make_synthetic_trace(const SyntheticTraceSpec& spec);

}  // namespace blocksim
