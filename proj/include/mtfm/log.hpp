// log.hpp — stderr logging, level picked up from the MTFM_LOG environment variable.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace mtfm {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static LogLevel lvl = [] {
        const char* env = std::getenv("MTFM_LOG");
        if (!env) return LogLevel::info;
        if (!std::strcmp(env, "quiet") || !std::strcmp(env, "0")) return LogLevel::quiet;
        if (!std::strcmp(env, "warn") || !std::strcmp(env, "1")) return LogLevel::warn;
        if (!std::strcmp(env, "debug") || !std::strcmp(env, "3")) return LogLevel::debug;
        return LogLevel::info;
    }();
    return lvl;
}

template <typename... Args>
void log_at(LogLevel lvl, const char* tag, const char* fmt, Args... args) {
    if (log_level() < lvl) return;
    std::fprintf(stderr, "[mtfm %s] ", tag);
    if constexpr (sizeof...(Args) == 0)
        std::fprintf(stderr, "%s", fmt);
    else
        std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

template <typename... Args>
void log_warn(const char* fmt, Args... args) { log_at(LogLevel::warn, "warn", fmt, args...); }
template <typename... Args>
void log_info(const char* fmt, Args... args) { log_at(LogLevel::info, "info", fmt, args...); }
template <typename... Args>
void log_debug(const char* fmt, Args... args) { log_at(LogLevel::debug, "debug", fmt, args...); }

}  // namespace mtfm
