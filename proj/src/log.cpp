#include "fscil/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

namespace fscil::log {
namespace {

Level parse_env() {
  const char* raw = std::getenv("FSCIL_LOG_LEVEL");
  if (raw == nullptr) return Level::warn;
  std::string v(raw);
  if (v == "error") return Level::error;
  if (v == "warn") return Level::warn;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

Level& current() {
  static Level lv = parse_env();
  return lv;
}

const char* tag(Level lv) {
  switch (lv) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    default: return "debug";
  }
}

}  // namespace

Level level() { return current(); }

void set_level(Level lv) { current() = lv; }

void write(Level lv, const std::string& msg) {
  if (static_cast<int>(lv) > static_cast<int>(current())) return;
  std::fprintf(stderr, "[%s] %s\n", tag(lv), msg.c_str());
}

}  // namespace fscil::log
