#include "disco/logging.hpp"

#include <cstdlib>

namespace disco {

LogLevel log_level() {
  static const LogLevel lvl = [] {
    const char* env = std::getenv("DISCO_LOG");
    if (!env) return LogLevel::info;
    const std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "quiet") return LogLevel::quiet;
    return LogLevel::info;
  }();
  return lvl;
}

namespace detail {

void log_line(LogLevel lvl, const std::string& msg) {
  std::cerr << (lvl == LogLevel::debug ? "[disco:debug] " : "[disco] ") << msg << "\n";
}

}  // namespace detail
}  // namespace disco
