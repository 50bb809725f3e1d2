#include "sapflow/log.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace sapflow::logging {

namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("sapflow");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *log;
}

}  // namespace

void configure_from_env() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (const char* v = std::getenv(kLevelEnv)) logger().set_level(spdlog::level::from_str(v));
  });
}

void debug(const std::string& msg) { logger().debug(msg); }
void info(const std::string& msg) { logger().info(msg); }
void warn(const std::string& msg) { logger().warn(msg); }
void error(const std::string& msg) { logger().error(msg); }

}  // namespace sapflow::logging
