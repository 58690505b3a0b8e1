#include "blocksim/service.h"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "blocksim/backend.h"
#include "blocksim/error.h"
#include "blocksim/json_io.h"
#include "blocksim/log.h"
#include "blocksim/predictor.h"

namespace blocksim {

using nlohmann::json;

namespace {

constexpr const char* kJsonMime = "application/json";

std::pair<std::string, int> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error("bad address '" + address + "'");
  return {address.substr(0, colon), std::stoi(address.substr(colon + 1))};
}

class HttpService : public ServiceHandle {
 public:
  HttpService() : server_(std::make_unique<httplib::Server>()) {}

  ~HttpService() override { stop(); }

  httplib::Server& server() { return *server_; }

  void start(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_->bind_to_any_port(host);
    } else {
      if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
      port_ = port;
    }
    if (port_ <= 0) throw Error("cannot bind " + host);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }

  int port() const override { return port_; }

  void stop() override {
    if (thread_.joinable()) {
      server_->stop();
      thread_.join();
    }
    on_stop();
  }

 protected:
  virtual void on_stop() {}

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

// ---------------------------------------------------------------------------
// Backend role: one paced simulated instance.

class BackendService : public HttpService {
 public:
  BackendService(const InstanceConfig& config, int pacing_ms)
      : config_(config), instance_(config), pacing_ms_(pacing_ms) {}

  void setup_routes() {
    server().Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"ok\":true}", kJsonMime);
    });
    server().Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mutex_);
      const SimTime now = elapsed();
      advance(now);
      res.set_content(snapshot_to_json(instance_.snapshot(now, qpm_.qpm(config_.instance_id, now))),
                      kJsonMime);
    });
    server().Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      json j = json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j.contains("prompt_tokens") ||
          !j.contains("output_tokens")) {
        res.status = 400;
        res.set_content(error_body("bad-schema", "need id, prompt_tokens, output_tokens"),
                        kJsonMime);
        return;
      }
      try {
        const RequestId id = j.at("id").get<RequestId>();
        const TokenCount prompt = j.at("prompt_tokens").get<TokenCount>();
        const TokenCount output = j.at("output_tokens").get<TokenCount>();
        const TokenCount estimated = j.contains("estimated_output_tokens")
                                         ? j.at("estimated_output_tokens").get<TokenCount>()
                                         : output;
        std::lock_guard<std::mutex> lock(mutex_);
        const SimTime now = elapsed();
        advance(now);
        instance_.admit(id, prompt, output, estimated);
        qpm_.record_dispatch(config_.instance_id, now);
        admit_times_[id] = now;
        if (!instance_.mid_step()) start_step(now);
        res.set_content(json{{"queued", true}, {"admit_s", now.seconds()}}.dump(), kJsonMime);
      } catch (const RequestTooLargeError& e) {
        res.status = 422;
        res.set_content(error_body("request-too-large", e.what()), kJsonMime);
      } catch (const json::exception& e) {
        res.status = 400;
        res.set_content(error_body("bad-schema", e.what()), kJsonMime);
      }
    });
    server().Get("/requests", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mutex_);
      advance(elapsed());
      json rows = json::array();
      for (const auto& row : completed_) {
        rows.push_back(json{{"id", row.id},
                            {"admit_s", row.admit.seconds()},
                            {"first_token_s", row.first_token.seconds()},
                            {"finish_s", row.finish.seconds()},
                            {"ttft_s", (row.first_token - row.admit).seconds()},
                            {"e2e_s", (row.finish - row.admit).seconds()}});
      }
      res.set_content(rows.dump(), kJsonMime);
    });

    ticker_ = std::thread([this] {
      std::unique_lock<std::mutex> lock(ticker_mutex_);
      while (!stopping_) {
        ticker_cv_.wait_for(lock, std::chrono::milliseconds(pacing_ms_));
        std::lock_guard<std::mutex> state_lock(mutex_);
        advance(elapsed());
      }
    });
  }

 protected:
  void on_stop() override {
    {
      std::lock_guard<std::mutex> lock(ticker_mutex_);
      stopping_ = true;
    }
    ticker_cv_.notify_all();
    if (ticker_.joinable()) ticker_.join();
  }

 private:
  struct CompletedRow {
    RequestId id;
    SimTime admit;
    SimTime first_token;
    SimTime finish;
  };

  SimTime elapsed() const {
    const auto wall = std::chrono::steady_clock::now() - start_;
    return SimTime::from_ticks(
        std::chrono::duration_cast<std::chrono::nanoseconds>(wall).count());
  }

  void start_step(SimTime at) {
    const StepBegin begin = instance_.begin_step();
    step_end_ = at + begin.duration;
  }

  // Completes every step whose exact end time has passed; successive steps
  // chain at exact boundaries regardless of tick jitter.
  void advance(SimTime now) {
    while (step_end_ && *step_end_ <= now) {
      const SimTime end = *step_end_;
      step_end_.reset();
      const StepFinish finish = instance_.finish_step();
      for (const RequestId id : finish.first_tokens) {
        if (!first_token_times_.count(id)) first_token_times_[id] = end;
      }
      for (const RequestId id : finish.completed) {
        completed_.push_back({id, admit_times_[id], first_token_times_[id], end});
        admit_times_.erase(id);
        first_token_times_.erase(id);
      }
      if (instance_.has_work()) start_step(end);
    }
    if (!step_end_ && !instance_.mid_step() && instance_.has_work()) start_step(now);
  }

  InstanceConfig config_;
  Instance instance_;
  int pacing_ms_;
  std::mutex mutex_;
  QpmTracker qpm_;
  std::optional<SimTime> step_end_;
  std::map<RequestId, SimTime> admit_times_;
  std::map<RequestId, SimTime> first_token_times_;
  std::vector<CompletedRow> completed_;
  const std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

  std::thread ticker_;
  std::mutex ticker_mutex_;
  std::condition_variable ticker_cv_;
  bool stopping_ = false;
};

// ---------------------------------------------------------------------------
// Predictor role: stateless, horizontally replicable.

class PredictorService : public HttpService {
 public:
  PredictorService(CacheMode cache_mode, TokenCount cache_bucket)
      : cache_(cache_mode == CacheMode::kOff ? nullptr
                                             : std::make_unique<LatencyCache>(cache_mode,
                                                                              cache_bucket)) {}

  void setup_routes() {
    server().Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"ok\":true}", kJsonMime);
    });
    server().Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const PredictionRequest request = prediction_request_from_json(req.body);
        const PredictionResult result = predict(request, cache_.get());
        res.set_content(prediction_result_to_json(result), kJsonMime);
      } catch (const PredictionError& e) {
        res.status = 422;
        res.set_content(error_body("prediction-failure", e.what()), kJsonMime);
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(error_body("bad-schema", e.what()), kJsonMime);
      }
    });
  }

 private:
  std::unique_ptr<LatencyCache> cache_;
};

// ---------------------------------------------------------------------------
// Scheduler role.

class SchedulerService : public HttpService {
 public:
  SchedulerService(const PolicyConfig& policy, const InstanceConfig& config_template,
                   const ServeSpec& spec)
      : template_(config_template),
        spec_(spec),
        dispatcher_(policy, config_template),
        predictor_client_(spec.predictor_address.empty()
                              ? nullptr
                              : std::make_unique<HttpPredictorClient>(
                                    spec.predictor_address, config_template,
                                    spec.predictor_timeout_ms)) {}

  void setup_routes() {
    server().Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"ok\":true}", kJsonMime);
    });
    server().Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mutex_);
      const double mean_overhead =
          dispatch_count_ > 0 ? overhead_ms_total_ / static_cast<double>(dispatch_count_) : 0.0;
      res.set_content(json{{"dispatches", dispatch_count_},
                           {"fallbacks", dispatcher_.fallback_count()},
                           {"mean_overhead_ms", mean_overhead}}
                          .dump(),
                      kJsonMime);
    });
    server().Post("/dispatch", [this](const httplib::Request& req, httplib::Response& res) {
      handle_dispatch(req, res);
    });
  }

 private:
  void handle_dispatch(const httplib::Request& req, httplib::Response& res) {
    const auto started = std::chrono::steady_clock::now();
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("request")) {
      res.status = 400;
      res.set_content(error_body("bad-schema", "need a request object"), kJsonMime);
      return;
    }

    CandidateRequest candidate;
    RequestId request_id = 0;
    TokenCount output_tokens = 0;
    try {
      const json& r = j.at("request");
      request_id = r.value("id", static_cast<RequestId>(0));
      candidate.prompt_tokens = r.at("prompt_tokens").get<TokenCount>();
      candidate.estimated_output_tokens = r.at("estimated_output_tokens").get<TokenCount>();
      output_tokens = r.value("output_tokens", candidate.estimated_output_tokens);
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(error_body("bad-schema", e.what()), kJsonMime);
      return;
    }
    const bool dry_run = j.value("dry_run", false);

    // Snapshots come inline (fixture mode) or from the backends' status
    // API; address_of remembers where each instance id lives.
    std::vector<InstanceSnapshot> snapshots;
    std::map<InstanceId, std::string> address_of;
    if (j.contains("snapshots")) {
      try {
        for (const auto& s : j.at("snapshots")) snapshots.push_back(snapshot_from_json(s.dump()));
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(error_body("bad-schema", e.what()), kJsonMime);
        return;
      }
    } else {
      for (const std::string& address : spec_.backends) {
        auto [host, port] = split_address(address);
        httplib::Client client(host, port);
        client.set_connection_timeout(1, 0);
        auto status = client.Get("/status");
        if (!status || status->status != 200) {
          res.status = 502;
          res.set_content(error_body("instance-unknown", "backend " + address + " unreachable"),
                          kJsonMime);
          return;
        }
        InstanceSnapshot snapshot = snapshot_from_json(status->body);
        address_of[snapshot.instance_id] = address;
        snapshots.push_back(std::move(snapshot));
      }
    }
    if (snapshots.empty()) {
      res.status = 502;
      res.set_content(error_body("instance-unknown", "no snapshots available"), kJsonMime);
      return;
    }

    DispatchDecision decision;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      try {
        decision = dispatcher_.dispatch(candidate, snapshots, predictor_client_.get());
      } catch (const PredictorUnavailableError& e) {
        res.status = 504;
        res.set_content(error_body("predictor-timeout", e.what()), kJsonMime);
        return;
      }
      if (decision.used_fallback && !spec_.fallback_on_predictor_timeout) {
        res.status = 504;
        res.set_content(error_body("predictor-timeout", "predictor unreachable"), kJsonMime);
        return;
      }
      ++dispatch_count_;
    }

    if (!dry_run && !address_of.empty()) {
      auto found = address_of.find(decision.instance_id);
      if (found == address_of.end()) {
        res.status = 502;
        res.set_content(error_body("instance-unknown",
                                   "no backend for instance " +
                                       std::to_string(decision.instance_id)),
                        kJsonMime);
        return;
      }
      auto [host, port] = split_address(found->second);
      httplib::Client client(host, port);
      const json forward{{"id", request_id},
                         {"prompt_tokens", candidate.prompt_tokens},
                         {"output_tokens", output_tokens},
                         {"estimated_output_tokens", candidate.estimated_output_tokens}};
      auto reply = client.Post("/generate", forward.dump(), kJsonMime);
      if (!reply || reply->status != 200) {
        res.status = 502;
        res.set_content(error_body("instance-unknown", "generate failed on " + found->second),
                        kJsonMime);
        return;
      }
    }

    const double overhead_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      overhead_ms_total_ += overhead_ms;
    }
    json body{{"instance_id", decision.instance_id},
              {"used_fallback", decision.used_fallback},
              {"overhead_ms", overhead_ms}};
    if (!decision.predictions.empty()) {
      json predictions = json::object();
      for (const auto& [iid, prediction] : decision.predictions) {
        predictions[std::to_string(iid)] =
            json::parse(prediction_result_to_json(prediction));
      }
      body["predictions"] = predictions;
    }
    res.set_content(body.dump(), kJsonMime);
  }

  InstanceConfig template_;
  ServeSpec spec_;
  std::mutex mutex_;
  Dispatcher dispatcher_;
  std::unique_ptr<HttpPredictorClient> predictor_client_;
  std::uint64_t dispatch_count_ = 0;
  double overhead_ms_total_ = 0;
};

}  // namespace

HttpPredictorClient::HttpPredictorClient(std::string address,
                                         const InstanceConfig& config_template, int timeout_ms)
    : address_(std::move(address)), template_(config_template), timeout_ms_(timeout_ms) {}

std::map<InstanceId, PredictionResult> HttpPredictorClient::predict_across(
    const std::vector<InstanceSnapshot>& snapshots, const CandidateRequest& candidate) {
  auto [host, port] = split_address(address_);
  httplib::Client client(host, port);
  client.set_connection_timeout(0, timeout_ms_ * 1000);
  client.set_read_timeout(0, timeout_ms_ * 1000);
  std::map<InstanceId, PredictionResult> results;
  for (const InstanceSnapshot& snapshot : snapshots) {
    PredictionRequest request;
    request.snapshot = snapshot;
    request.candidate = candidate;
    request.instance_config = template_;
    request.instance_config.instance_id = snapshot.instance_id;
    auto reply = client.Post("/predict", prediction_request_to_json(request), kJsonMime);
    if (!reply || reply->status != 200) {
      throw PredictorUnavailableError("predictor at " + address_ + " unreachable");
    }
    results[snapshot.instance_id] = prediction_result_from_json(reply->body);
  }
  return results;
}

std::unique_ptr<ServiceHandle> start_backend_service(const InstanceConfig& config,
                                                     const std::string& host, int port,
                                                     int pacing_ms) {
  auto service = std::make_unique<BackendService>(config, pacing_ms);
  service->setup_routes();
  service->start(host, port);
  return service;
}

std::unique_ptr<ServiceHandle> start_predictor_service(const std::string& host, int port,
                                                       CacheMode cache_mode,
                                                       TokenCount cache_bucket) {
  auto service = std::make_unique<PredictorService>(cache_mode, cache_bucket);
  service->setup_routes();
  service->start(host, port);
  return service;
}

std::unique_ptr<ServiceHandle> start_scheduler_service(const PolicyConfig& policy,
                                                       const InstanceConfig& config_template,
                                                       const ServeSpec& spec) {
  auto service = std::make_unique<SchedulerService>(policy, config_template, spec);
  service->setup_routes();
  service->start(spec.listen_host, spec.listen_port);
  return service;
}

int serve_role(const std::string& role, const ExperimentSpec& experiment, const ServeSpec& spec) {
  std::unique_ptr<ServiceHandle> handle;
  if (role == "backend") {
    InstanceConfig config = experiment.instance_template;
    config.instance_id = spec.instance_id;
    handle = start_backend_service(config, spec.listen_host, spec.listen_port, spec.pacing_ms);
  } else if (role == "predictor") {
    handle = start_predictor_service(spec.listen_host, spec.listen_port, experiment.cache_mode,
                                     experiment.cache_bucket);
  } else if (role == "scheduler") {
    handle = start_scheduler_service(experiment.policy, experiment.instance_template, spec);
  } else {
    throw ConfigError("serve.role", "must be backend, predictor, or scheduler");
  }
  BLOCKSIM_LOG_INFO << role << " service listening on " << spec.listen_host << ":"
                    << handle->port();
  // Block until interrupted.
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  return 0;
}

}  // namespace blocksim
