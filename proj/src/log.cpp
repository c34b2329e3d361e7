#include "geoalign/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace geoalign {

namespace {

LogLevel initial_level() {
  const char* env = std::getenv("GEOALIGN_LOG");
  if (env == nullptr) return LogLevel::Warn;
  const std::string v = env;
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "error") return LogLevel::Error;
  if (v == "off") return LogLevel::Off;
  return LogLevel::Warn;
}

std::atomic<LogLevel>& threshold() {
  static std::atomic<LogLevel> level{initial_level()};
  return level;
}

}  // namespace

void set_log_level(LogLevel level) { threshold().store(level); }
LogLevel log_level() { return threshold().load(); }

void log(LogLevel level, std::string_view message) {
  if (level < threshold().load()) return;
  static std::mutex mutex;
  static constexpr const char* kNames[] = {"DEBUG", "INFO", "WARN", "ERROR"};
  std::lock_guard lock(mutex);
  std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace geoalign
