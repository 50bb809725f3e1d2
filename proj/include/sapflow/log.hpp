#pragma once

#include <string>

namespace sapflow::logging {

/// Environment variable holding the log level (trace, debug, info, warn, error, off).
inline constexpr const char* kLevelEnv = "SAPFLOW_LOG_LEVEL";

/// Reads kLevelEnv; defaults to warn. Safe to call more than once.
void configure_from_env();

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace sapflow::logging
