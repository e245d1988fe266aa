#include "choreeq/logging.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace choreeq::log {

namespace {

std::atomic<long> g_warnings{0};

Level parse_env() {
  const char* v = std::getenv("CHOREEQ_LOG");
  if (v == nullptr) return Level::kWarn;
  std::string s(v);
  if (s == "error") return Level::kError;
  if (s == "warn") return Level::kWarn;
  if (s == "info") return Level::kInfo;
  if (s == "debug") return Level::kDebug;
  return Level::kWarn;
}

Level& current() {
  static Level lv = parse_env();
  return lv;
}

std::mutex& mu() {
  static std::mutex m;
  return m;
}

void emit(const char* tag, const std::string& msg) {
  std::lock_guard<std::mutex> lock(mu());
  std::cerr << "[choreeq:" << tag << "] " << msg << "\n";
}

}  // namespace

Level level() { return current(); }

void set_level(Level lv) { current() = lv; }

void error(const std::string& msg) {
  if (level() >= Level::kError) emit("error", msg);
}

void warn(const std::string& msg) {
  g_warnings.fetch_add(1);
  if (level() >= Level::kWarn) emit("warn", msg);
}

void info(const std::string& msg) {
  if (level() >= Level::kInfo) emit("info", msg);
}

void debug(const std::string& msg) {
  if (level() >= Level::kDebug) emit("debug", msg);
}

long warn_count() { return g_warnings.load(); }

}  // namespace choreeq::log
