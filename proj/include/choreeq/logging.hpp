#pragma once

#include <string>

namespace choreeq::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Level is read once from the CHOREEQ_LOG environment variable
// ("error" | "warn" | "info" | "debug"); default is warn.
Level level();

void set_level(Level lv);

void error(const std::string& msg);
void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

// Number of warnings emitted since process start (test hook).
long warn_count();

}  // namespace choreeq::log
