#pragma once

#include <string>

#include "blocksim/predictor.h"
#include "blocksim/types.h"

namespace blocksim {

// Wire schema shared by the service mode and fixture files. Snapshot field
// names are exactly instance_id, snapshot_time, free_blocks, batch_size,
// qpm, running[], waiting[]; per-request fields are id, prompt_tokens,
// estimated_output_tokens, prefill_progress, decoded_tokens.

std::string snapshot_to_json(const InstanceSnapshot& snapshot);
InstanceSnapshot snapshot_from_json(const std::string& text);  // throws Error on bad schema

std::string prediction_result_to_json(const PredictionResult& result);
PredictionResult prediction_result_from_json(const std::string& text);

std::string prediction_request_to_json(const PredictionRequest& request);
PredictionRequest prediction_request_from_json(const std::string& text);

std::string instance_config_to_json(const InstanceConfig& config);
InstanceConfig instance_config_from_json(const std::string& text);

// {"error": "<code>"} with the machine-readable codes bad-schema,
// instance-unknown, predictor-timeout, request-too-large.
std::string error_body(const std::string& code, const std::string& detail = "");

}  // namespace blocksim
