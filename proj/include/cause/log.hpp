#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace cause::logging {

enum class Level { error = 0, info = 1, debug = 2 };

// Log threshold comes from CAUSE_LOG={error|info|debug}; default info.
inline Level threshold() {
  static const Level lvl = [] {
    const char* env = std::getenv("CAUSE_LOG");
    if (env == nullptr) return Level::info;
    if (std::strcmp(env, "error") == 0) return Level::error;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    return Level::info;
  }();
  return lvl;
}

inline void emit(Level lvl, const char* tag, const char* fmt, std::va_list ap) {
  if (lvl > threshold()) return;
  std::fprintf(stderr, "[cause:%s] ", tag);
  std::vfprintf(stderr, fmt, ap);
  std::fputc('\n', stderr);
}

inline void error(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  emit(Level::error, "error", fmt, ap);
  va_end(ap);
}

inline void info(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  emit(Level::info, "info", fmt, ap);
  va_end(ap);
}

inline void debug(const char* fmt, ...) {
  std::va_list ap;
  va_start(ap, fmt);
  emit(Level::debug, "debug", fmt, ap);
  va_end(ap);
}

}  // namespace cause::logging
