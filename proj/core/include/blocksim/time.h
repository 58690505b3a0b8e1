#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace blocksim {

// Simulated time, stored as integer nanosecond ticks. Integer arithmetic
// keeps timestamp sums associativity-free, so a forward simulation that
// accumulates the same step durations as a live run lands on identical
// values tick for tick.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime zero() { return SimTime{0}; }
  static constexpr SimTime from_ticks(std::int64_t ticks) { return SimTime{ticks}; }
  static SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(std::llround(s * 1e9))};
  }

  constexpr std::int64_t ticks() const { return ticks_; }
  double seconds() const { return static_cast<double>(ticks_) * 1e-9; }

  // Fixed 9-decimal rendering computed from the integer value; used for
  // report files so repeated runs serialize byte-identically.
  std::string to_string() const;

  constexpr auto operator<=>(const SimTime&) const = default;
  constexpr SimTime operator+(SimTime o) const { return SimTime{ticks_ + o.ticks_}; }
  constexpr SimTime operator-(SimTime o) const { return SimTime{ticks_ - o.ticks_}; }
  SimTime& operator+=(SimTime o) {
    ticks_ += o.ticks_;
    return *this;
  }

 private:
  constexpr explicit SimTime(std::int64_t ticks) : ticks_(ticks) {}
  std::int64_t ticks_ = 0;
};

}  // namespace blocksim
