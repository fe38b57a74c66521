#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace disco {

enum class LogLevel { debug = 0, info = 1, quiet = 2 };

// Log level comes from DISCO_LOG=debug|info|quiet (default info).
LogLevel log_level();

namespace detail {
void log_line(LogLevel lvl, const std::string& msg);
}

template <typename... Args>
void log_info(Args&&... args) {
  if (log_level() > LogLevel::info) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::info, os.str());
}

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_level() > LogLevel::debug) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::debug, os.str());
}

}  // namespace disco
