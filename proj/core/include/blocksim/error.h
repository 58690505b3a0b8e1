#pragma once

#include <stdexcept>
#include <string>

namespace blocksim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration rejected before any simulation runs. Carries the name of
// the offending field.
struct ConfigError : Error {
  ConfigError(std::string field_name, const std::string& what)
      : Error("invalid config: " + field_name + ": " + what), field(std::move(field_name)) {}
  std::string field;
};

// push() with a fire time earlier than the current simulated time.
struct TimeTravelError : Error {
  using Error::Error;
};

// An event handler threw; the failing event is described in the message.
struct HandlerError : Error {
  using Error::Error;
};

// The request cannot fit on the instance even when it is completely empty.
struct RequestTooLargeError : Error {
  using Error::Error;
};

// A single running request cannot proceed with the whole memory free.
struct DeadlockError : Error {
  using Error::Error;
};

// form_batch() on an instance with nothing runnable.
struct EmptyPlanError : Error {
  using Error::Error;
};

// predict() could not complete the forward simulation.
struct PredictionError : Error {
  using Error::Error;
};

// The predictor backing a BlockPredictive dispatch could not be reached.
struct PredictorUnavailableError : Error {
  using Error::Error;
};

struct NoInstancesError : Error {
  using Error::Error;
};

struct DuplicateInstanceError : Error {
  using Error::Error;
};

// Trace file could not be parsed; carries the 1-based line number.
struct TraceParseError : Error {
  TraceParseError(int line_number, const std::string& what)
      : Error("trace parse error at line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  int line;
};

// A trace record violates a field invariant.
struct InvalidRecordError : Error {
  InvalidRecordError(std::string field_name, const std::string& what)
      : Error("invalid trace record: " + field_name + ": " + what), field(std::move(field_name)) {}
  std::string field;
};

// The lowest swept QPS already violates the SLO.
struct NoCapacityError : Error {
  using Error::Error;
};

}  // namespace blocksim
