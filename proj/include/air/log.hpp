#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace air::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Reads AIR_LOG_LEVEL (error | info | debug); anything else means info.
inline Level level_from_env() {
  const char* v = std::getenv("AIR_LOG_LEVEL");
  if (!v) return Level::info;
  const std::string_view s(v);
  if (s == "error") return Level::error;
  if (s == "debug") return Level::debug;
  return Level::info;
}

inline Level& threshold() {
  static Level l = level_from_env();
  return l;
}

inline void write(Level l, std::string_view tag, const std::string& msg) {
  if (static_cast<int>(l) > static_cast<int>(threshold())) return;
  std::cerr << '[' << tag << "] " << msg << '\n';
}

inline void error(const std::string& msg) { write(Level::error, "error", msg); }
inline void info(const std::string& msg) { write(Level::info, "info", msg); }
inline void debug(const std::string& msg) { write(Level::debug, "debug", msg); }

}  // namespace air::log
