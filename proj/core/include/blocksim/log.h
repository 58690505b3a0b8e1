#pragma once

#include <sstream>
#include <string>

namespace blocksim {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Process-wide level, initialized from BLOCK_LOG_LEVEL (error|warn|info|debug).
LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const std::string& message);

namespace detail {
class LogLine {
 public:
  explicit LogLine(LogLevel level) : level_(level) {}
  ~LogLine() { log_message(level_, stream_.str()); }
  template <typename T>
  LogLine& operator<<(const T& v) {
    stream_ << v;
    return *this;
  }

 private:
  LogLevel level_;
  std::ostringstream stream_;
};
}  // namespace detail

#define BLOCKSIM_LOG(level) \
  if (::blocksim::log_level() >= (level)) ::blocksim::detail::LogLine(level)

#define BLOCKSIM_LOG_ERROR BLOCKSIM_LOG(::blocksim::LogLevel::kError)
#define BLOCKSIM_LOG_WARN BLOCKSIM_LOG(::blocksim::LogLevel::kWarn)
#define BLOCKSIM_LOG_INFO BLOCKSIM_LOG(::blocksim::LogLevel::kInfo)
#define BLOCKSIM_LOG_DEBUG BLOCKSIM_LOG(::blocksim::LogLevel::kDebug)

}  // namespace blocksim
