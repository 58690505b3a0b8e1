#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "blocksim/time.h"

namespace blocksim {

enum class EventKind {
  kArrival,            // a: request id
  kDispatch,           // a: request id, b: instance id (delayed admission)
  kBatchComplete,      // a: instance id
  kProvisionComplete,  // a: instance id
  kProbe,              // a: request id
};

const char* to_string(EventKind kind);

struct Event {
  SimTime fire_time;
  std::uint64_t seq = 0;  // push-order tiebreaker; unique per run
  EventKind kind = EventKind::kArrival;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

class EventHandler {
 public:
  virtual ~EventHandler() = default;
  virtual void handle(const Event& event) = 0;
  // Called once all events at the current instant have been processed;
  // batch formation hooks in here so same-instant admissions are visible.
  virtual void end_of_instant(SimTime now) { (void)now; }
};

// Deterministic discrete-event kernel. Events are processed in strict
// (fire_time, seq) order; the processed-event log accumulates across
// run_until calls. Copyable, so a whole simulation can be forked.
class EventLoop {
 public:
  SimTime now() const { return now_; }

  // Throws TimeTravelError when fire_time < now().
  void push(EventKind kind, SimTime fire_time, std::uint64_t a = 0, std::uint64_t b = 0);

  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

  // Processes events until the queue drains or the next event would fire
  // past `deadline`; the clock ends at the last processed fire time.
  // Handler exceptions propagate as HandlerError with the event attached.
  void run_until(std::optional<SimTime> deadline, EventHandler& handler);

  const std::vector<Event>& log() const { return log_; }

  // One line per processed event: "<seconds> <kind> <a> <b>".
  std::string render_log() const;

 private:
  struct Later {
    bool operator()(const Event& lhs, const Event& rhs) const {
      if (lhs.fire_time != rhs.fire_time) return lhs.fire_time > rhs.fire_time;
      return lhs.seq > rhs.seq;
    }
  };

  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<Event> log_;
};

}  // namespace blocksim
