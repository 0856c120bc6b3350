#include "scenefit/log.hpp"

#include <cstdio>
#include <cstdlib>

namespace scenefit {

namespace {

LogLevel parse_level() {
  const char* env = std::getenv("SCENEFIT_LOG");
  if (!env) return LogLevel::kWarn;
  const std::string value(env);
  if (value == "debug") return LogLevel::kDebug;
  if (value == "info") return LogLevel::kInfo;
  if (value == "warn") return LogLevel::kWarn;
  if (value == "error") return LogLevel::kError;
  return LogLevel::kWarn;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::kDebug: return "debug";
    case LogLevel::kInfo: return "info";
    case LogLevel::kWarn: return "warn";
    case LogLevel::kError: return "error";
  }
  return "?";
}

}  // namespace

LogLevel log_threshold() {
  static const LogLevel level = parse_level();
  return level;
}

void log_message(LogLevel level, const std::string& message) {
  std::fprintf(stderr, "[scenefit %s] %s\n", level_tag(level), message.c_str());
}

}  // namespace scenefit
