#include "blocksim/json_io.h"

#include <nlohmann/json.hpp>

#include "blocksim/error.h"

namespace blocksim {

using nlohmann::json;

namespace {

json snapshot_request_to_json_obj(const SnapshotRequest& r) {
  return json{{"id", r.id},
              {"prompt_tokens", r.prompt_tokens},
              {"estimated_output_tokens", r.estimated_output_tokens},
              {"prefill_progress", r.prefill_progress},
              {"decoded_tokens", r.decoded_tokens}};
}

SnapshotRequest snapshot_request_from_json_obj(const json& j) {
  SnapshotRequest r;
  r.id = j.at("id").get<RequestId>();
  r.prompt_tokens = j.at("prompt_tokens").get<TokenCount>();
  r.estimated_output_tokens = j.at("estimated_output_tokens").get<TokenCount>();
  r.prefill_progress = j.at("prefill_progress").get<TokenCount>();
  r.decoded_tokens = j.at("decoded_tokens").get<TokenCount>();
  return r;
}

json snapshot_to_json_obj(const InstanceSnapshot& s) {
  json running = json::array();
  for (const auto& r : s.running) running.push_back(snapshot_request_to_json_obj(r));
  json waiting = json::array();
  for (const auto& r : s.waiting) waiting.push_back(snapshot_request_to_json_obj(r));
  return json{{"instance_id", s.instance_id}, {"snapshot_time", s.snapshot_time.seconds()},
              {"free_blocks", s.free_blocks},  {"batch_size", s.batch_size},
              {"qpm", s.qpm},                  {"running", running},
              {"waiting", waiting}};
}

InstanceSnapshot snapshot_from_json_obj(const json& j) {
  InstanceSnapshot s;
  s.instance_id = j.at("instance_id").get<InstanceId>();
  s.snapshot_time = SimTime::from_seconds(j.at("snapshot_time").get<double>());
  s.free_blocks = j.at("free_blocks").get<int>();
  s.batch_size = j.at("batch_size").get<int>();
  s.qpm = j.at("qpm").get<int>();
  for (const auto& r : j.at("running")) s.running.push_back(snapshot_request_from_json_obj(r));
  for (const auto& r : j.at("waiting")) s.waiting.push_back(snapshot_request_from_json_obj(r));
  return s;
}

json instance_config_to_json_obj(const InstanceConfig& c) {
  return json{{"instance_id", c.instance_id},
              {"total_blocks", c.total_blocks},
              {"block_size", c.block_size},
              {"max_batch_size", c.max_batch_size},
              {"chunk_budget", c.chunk_budget},
              {"local_policy", to_string(c.local_policy)},
              {"cost_model",
               {{"c0_s", c.cost_model.c0_s},
                {"prefill_s_per_token", c.cost_model.prefill_s_per_token},
                {"decode_s_per_seq", c.cost_model.decode_s_per_seq},
                {"context_s_per_token", c.cost_model.context_s_per_token}}}};
}

InstanceConfig instance_config_from_json_obj(const json& j) {
  InstanceConfig c;
  c.instance_id = j.at("instance_id").get<InstanceId>();
  c.total_blocks = j.at("total_blocks").get<int>();
  c.block_size = j.at("block_size").get<int>();
  c.max_batch_size = j.at("max_batch_size").get<int>();
  c.chunk_budget = j.at("chunk_budget").get<int>();
  c.local_policy = parse_local_policy(j.at("local_policy").get<std::string>());
  const json& cost = j.at("cost_model");
  c.cost_model.c0_s = cost.at("c0_s").get<double>();
  c.cost_model.prefill_s_per_token = cost.at("prefill_s_per_token").get<double>();
  c.cost_model.decode_s_per_seq = cost.at("decode_s_per_seq").get<double>();
  c.cost_model.context_s_per_token = cost.at("context_s_per_token").get<double>();
  return c;
}

template <typename Fn>
auto parse_with(const std::string& text, Fn fn) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error("bad-schema: malformed JSON");
  try {
    return fn(j);
  } catch (const json::exception& e) {
    throw Error(std::string("bad-schema: ") + e.what());
  }
}

}  // namespace

std::string snapshot_to_json(const InstanceSnapshot& snapshot) {
  return snapshot_to_json_obj(snapshot).dump();
}

InstanceSnapshot snapshot_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) { return snapshot_from_json_obj(j); });
}

std::string prediction_result_to_json(const PredictionResult& result) {
  json j;
  j["metrics"] = result.metrics;
  j["simulated_steps"] = result.simulated_steps;
  return j.dump();
}

PredictionResult prediction_result_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) {
    PredictionResult r;
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.simulated_steps = j.at("simulated_steps").get<std::int64_t>();
    return r;
  });
}

std::string prediction_request_to_json(const PredictionRequest& request) {
  json j;
  j["snapshot"] = snapshot_to_json_obj(request.snapshot);
  j["candidate"] = json{{"prompt_tokens", request.candidate.prompt_tokens},
                        {"estimated_output_tokens", request.candidate.estimated_output_tokens}};
  j["instance_config"] = instance_config_to_json_obj(request.instance_config);
  return j.dump();
}

PredictionRequest prediction_request_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) {
    PredictionRequest r;
    r.snapshot = snapshot_from_json_obj(j.at("snapshot"));
    r.candidate.prompt_tokens = j.at("candidate").at("prompt_tokens").get<TokenCount>();
    r.candidate.estimated_output_tokens =
        j.at("candidate").at("estimated_output_tokens").get<TokenCount>();
    r.instance_config = instance_config_from_json_obj(j.at("instance_config"));
    return r;
  });
}

std::string instance_config_to_json(const InstanceConfig& config) {
  return instance_config_to_json_obj(config).dump();
}

InstanceConfig instance_config_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) { return instance_config_from_json_obj(j); });
}

std::string error_body(const std::string& code, const std::string& detail) {
  json j{{"error", code}};
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

}  // namespace blocksim
