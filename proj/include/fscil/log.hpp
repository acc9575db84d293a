#pragma once

#include <string>

namespace fscil::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Current verbosity. First call reads FSCIL_LOG_LEVEL (error|warn|info|debug,
// unknown values fall back to the default); default is warn.
Level level();
void set_level(Level lv);

void write(Level lv, const std::string& msg);

inline void error(const std::string& msg) { write(Level::error, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void debug(const std::string& msg) { write(Level::debug, msg); }

}  // namespace fscil::log
