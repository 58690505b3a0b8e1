#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "blocksim/config.h"
#include "blocksim/scheduler.h"
#include "blocksim/types.h"

namespace blocksim {

// Networked deployment: the same decision logic as the in-process driver,
// split into three roles carried as JSON over HTTP.
//
// backend   GET  /status    -> InstanceSnapshot
//           POST /generate  <- {id, prompt_tokens, output_tokens,
//                               estimated_output_tokens?}
//           GET  /requests  -> completed request timings
// predictor POST /predict   <- PredictionRequest -> PredictionResult
// scheduler POST /dispatch  <- {request:{...}, snapshots?:[...], dry_run?}
//           GET  /stats
//
// Errors use machine-readable codes: bad-schema, instance-unknown,
// predictor-timeout, request-too-large.

class ServiceHandle {
 public:
  virtual ~ServiceHandle() = default;
  virtual int port() const = 0;  // bound port
  virtual void stop() = 0;
};

// The backend paces a simulated clock against wall time in fixed ticks;
// step boundaries stay exact inside the tick loop, so recorded request
// timings match an in-process replay of the same admission times.
std::unique_ptr<ServiceHandle> start_backend_service(const InstanceConfig& config,
                                                     const std::string& host, int port,
                                                     int pacing_ms = 10);

std::unique_ptr<ServiceHandle> start_predictor_service(const std::string& host, int port,
                                                       CacheMode cache_mode = CacheMode::kExact,
                                                       TokenCount cache_bucket = 256);

std::unique_ptr<ServiceHandle> start_scheduler_service(const PolicyConfig& policy,
                                                       const InstanceConfig& config_template,
                                                       const ServeSpec& spec);

// Predictions over the wire; throws PredictorUnavailableError on timeout
// or transport failure.
class HttpPredictorClient : public PredictorClient {
 public:
  HttpPredictorClient(std::string address, const InstanceConfig& config_template,
                      int timeout_ms = 1000);
  std::map<InstanceId, PredictionResult> predict_across(
      const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate) override;

 private:
  std::string address_;
  InstanceConfig template_;
  int timeout_ms_;
};

// Blocks serving the given role until the process is interrupted.
int serve_role(const std::string& role, const ExperimentSpec& experiment, const ServeSpec& spec);

}  // namespace blocksim
