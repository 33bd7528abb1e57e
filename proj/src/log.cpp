#include "eventfly/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace eventfly {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("EVENTFLY_LOG");
        if (!env) return LogLevel::kWarn;
        if (std::strcmp(env, "error") == 0) return LogLevel::kError;
        if (std::strcmp(env, "warn") == 0) return LogLevel::kWarn;
        if (std::strcmp(env, "info") == 0) return LogLevel::kInfo;
        if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
        return LogLevel::kWarn;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& message) {
    if (level > log_level()) return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], message.c_str());
}

}  // namespace eventfly
