#include "blocksim/event_loop.h"

#include <sstream>

#include "blocksim/error.h"

namespace blocksim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kArrival: return "arrival";
    case EventKind::kDispatch: return "dispatch";
    case EventKind::kBatchComplete: return "batch_complete";
    case EventKind::kProvisionComplete: return "provision_complete";
    case EventKind::kProbe: return "probe";
  }
  return "unknown";
}

void EventLoop::push(EventKind kind, SimTime fire_time, std::uint64_t a, std::uint64_t b) {
  if (fire_time < now_) {
    throw TimeTravelError("push at t=" + fire_time.to_string() +
                          " before current time t=" + now_.to_string());
  }
  queue_.push(Event{fire_time, next_seq_++, kind, a, b});
}

void EventLoop::run_until(std::optional<SimTime> deadline, EventHandler& handler) {
  bool instant_open = false;
  for (;;) {
    if (queue_.empty() || (deadline && queue_.top().fire_time > *deadline)) {
      if (instant_open) {
        instant_open = false;
        handler.end_of_instant(now_);
        continue;  // the hook may have pushed new events
      }
      break;
    }
    const Event next = queue_.top();
    if (instant_open && next.fire_time > now_) {
      instant_open = false;
      handler.end_of_instant(now_);
      continue;
    }
    queue_.pop();
    now_ = next.fire_time;
    log_.push_back(next);
    try {
      handler.handle(next);
    } catch (const std::exception& e) {
      throw HandlerError(std::string("handler failed on event [t=") + next.fire_time.to_string() +
                         " kind=" + to_string(next.kind) + " a=" + std::to_string(next.a) +
                         " b=" + std::to_string(next.b) + "]: " + e.what());
    }
    instant_open = true;
  }
}

std::string EventLoop::render_log() const {
  std::ostringstream out;
  for (const Event& e : log_) {
    out << e.fire_time.to_string() << ' ' << to_string(e.kind) << ' ' << e.a << ' ' << e.b << '\n';
  }
  return out.str();
}

}  // namespace blocksim
