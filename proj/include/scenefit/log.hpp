#pragma once

#include <sstream>
#include <string>

namespace scenefit {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

// Threshold comes from the SCENEFIT_LOG environment variable
// (debug|info|warn|error); default is warn. Messages go to stderr.
LogLevel log_threshold();
void log_message(LogLevel level, const std::string& message);

namespace detail {
template <typename... Args>
std::string log_format(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}
}  // namespace detail

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_threshold() <= LogLevel::kDebug)
    log_message(LogLevel::kDebug, detail::log_format(std::forward<Args>(args)...));
}

template <typename... Args>
void log_info(Args&&... args) {
  if (log_threshold() <= LogLevel::kInfo)
    log_message(LogLevel::kInfo, detail::log_format(std::forward<Args>(args)...));
}

template <typename... Args>
void log_warn(Args&&... args) {
  if (log_threshold() <= LogLevel::kWarn)
    log_message(LogLevel::kWarn, detail::log_format(std::forward<Args>(args)...));
}

template <typename... Args>
void log_error(Args&&... args) {
  log_message(LogLevel::kError, detail::log_format(std::forward<Args>(args)...));
}

}  // namespace scenefit
